"""Numerical checks of the parametrix energy argument for Navier-Stokes on the torus."""
from .kernels import BACKEND
from .grid_field import (
    Grid, ScalarField, VectorField, Trajectory, TimePartition,
    spectral_forward, spectral_inverse, lp_norm, evaluate_offgrid,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Grid", "ScalarField", "VectorField", "Trajectory", "TimePartition",
    "spectral_forward", "spectral_inverse", "lp_norm", "evaluate_offgrid",
]
