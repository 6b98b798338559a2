"""Fourier-multiplier operators on the torus.

Heat kernel, heat semigroup and Green operator, the Leray projector and its
gradient complement, spectral differential operators, the dealiased
advection term and the constant of the exponential absorbing inequality.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_field import Grid, ScalarField, VectorField, spectral_inverse


@dataclass(frozen=True)
class HeatKernelParams:
    nu: float
    d: int

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("viscosity must be positive")
        if self.d not in (2, 3):
            raise ValueError("dimension must be 2 or 3")


def image_cutoff(nu_t: float, L: float) -> int:
    """Smallest image count ``M`` with ``exp(-(M L / 2)^2 / (4 nu t)) < 1e-16``."""
    M = 1
    while np.exp(-((M * L / 2) ** 2) / (4 * nu_t)) >= 1e-16:
        M += 1
    return M


def heat_kernel_point(params: HeatKernelParams, t: float, x, L: float = 2 * np.pi):
    """Wrapped Gaussian heat kernel on the torus ``[0, L)^d``.

    ``x`` is one point ``(d,)`` or an array ``(..., d)``.
    """
    if not t > 0:
        raise ValueError("heat kernel needs t > 0")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.d:
        raise ValueError("point dimension mismatch")
    nut = params.nu * t
    # minimal image, then |x_i|: the value is exactly even in x
    a = np.mod(np.abs(x), L)
    a = np.minimum(a, L - a)
    M = image_cutoff(nut, L)
    # the Gaussian factorises over axes, so sum images one axis at a time
    out = np.ones(x.shape[:-1])
    for i in range(params.d):
        axis_sum = np.zeros(x.shape[:-1])
        for m in range(-M, M + 1):
            axis_sum = axis_sum + np.exp(-(a[..., i] + m * L) ** 2 / (4 * nut))
        out = out * axis_sum
    out = out / (4 * np.pi * nut) ** (params.d / 2)
    return float(out) if out.ndim == 0 else out


def heat_multiplier(grid: Grid, nu: float, dt: float) -> np.ndarray:
    return np.exp(-nu * grid.k2() * dt)


def heat_semigroup(field, nu: float, dt: float):
    """``exp(nu * dt * Laplacian)`` applied exactly per Fourier mode."""
    if dt < 0:
        raise ValueError("semigroup needs dt >= 0")
    if dt == 0:
        return field
    return spectral_inverse(field.spectral * heat_multiplier(field.grid, nu, dt), field.grid)


def midpoint_nodes(r: float, t: float, m: int) -> tuple:
    """Composite midpoint nodes and step on ``[r, t]``."""
    if m < 1:
        raise ValueError("need at least one quadrature subinterval")
    ds = (t - r) / m
    return r + (np.arange(m) + 0.5) * ds, ds


def _as_time_dependent(psi):
    if callable(psi):
        return psi
    return lambda s: psi


def heat_green(psi, nu: float, r: float, t: float, m: int = 32):
    """Heat Green operator ``int_r^t P_{t-s} psi(s) ds`` by the midpoint rule.

    ``psi`` is a field (constant in time) or a callable ``s -> field``.
    """
    if r > t:
        raise ValueError(f"need r <= t, got r={r}, t={t}")
    psi = _as_time_dependent(psi)
    if r == t:
        return psi(t) * 0.0
    nodes, ds = midpoint_nodes(r, t, m)
    acc = None
    for s in nodes:
        f = psi(s)
        term = f.spectral * heat_multiplier(f.grid, nu, t - s)
        acc = term if acc is None else acc + term
    return spectral_inverse(acc * ds, f.grid)


def _leray_coeffs(grid: Grid, c: np.ndarray) -> np.ndarray:
    ks = grid.wavenumbers()
    k2 = grid.k2().copy()
    k2.flat[0] = 1.0
    kdotc = sum(ks[i] * c[i] for i in range(grid.d)) / k2
    out = np.array([c[i] - ks[i] * kdotc for i in range(grid.d)])
    return out


def leray_project(vfield: VectorField) -> VectorField:
    """Orthogonal projection onto divergence-free fields; the mean is kept."""
    if vfield.ncomp != vfield.grid.d:
        raise ValueError("Leray projection needs a d-component field")
    return spectral_inverse(_leray_coeffs(vfield.grid, vfield.spectral), vfield.grid)


def xi_apply(vfield: VectorField) -> VectorField:
    """Gradient part ``phi - P phi`` of the Helmholtz decomposition."""
    c = vfield.spectral
    return spectral_inverse(c - _leray_coeffs(vfield.grid, c), vfield.grid)


def grad(scalar: ScalarField) -> VectorField:
    ks = scalar.grid.wavenumbers()
    c = scalar.spectral
    return spectral_inverse(np.array([1j * k * c for k in ks]), scalar.grid)


def div(vfield: VectorField) -> ScalarField:
    grid = vfield.grid
    if vfield.ncomp != grid.d:
        raise ValueError("divergence needs a d-component field")
    ks = grid.wavenumbers()
    c = vfield.spectral
    return spectral_inverse(sum(1j * ks[i] * c[i] for i in range(grid.d)), grid)


def curl(vfield: VectorField):
    """Scalar vorticity in 2D, vector curl in 3D."""
    grid = vfield.grid
    if vfield.ncomp != grid.d:
        raise ValueError("curl needs a d-component field")
    ks = grid.wavenumbers()
    c = vfield.spectral
    if grid.d == 2:
        return spectral_inverse(1j * ks[0] * c[1] - 1j * ks[1] * c[0], grid)
    return spectral_inverse(np.array([
        1j * ks[1] * c[2] - 1j * ks[2] * c[1],
        1j * ks[2] * c[0] - 1j * ks[0] * c[2],
        1j * ks[0] * c[1] - 1j * ks[1] * c[0],
    ]), grid)


def laplacian(field):
    return spectral_inverse(-field.grid.k2() * field.spectral, field.grid)


def gradient_tensor(vfield: VectorField) -> np.ndarray:
    """``out[i, j] = d_j v_i`` on the grid."""
    grid = vfield.grid
    ks = grid.wavenumbers()
    c = vfield.spectral
    sc = np.array([[1j * ks[j] * c[i] for j in range(grid.d)] for i in range(vfield.ncomp)])
    return spectral_inverse(sc.reshape((-1,) + grid.spectral_shape), grid).values.reshape(
        (vfield.ncomp, grid.d) + grid.shape)


def hessian_tensor(field) -> np.ndarray:
    """``out[..., j, l] = d_j d_l field`` with component axes first."""
    grid = field.grid
    ks = grid.wavenumbers()
    c = field.spectral
    if c.ndim == grid.d:
        c = c[None]
    sc = np.array([[[-ks[j] * ks[l] * ci for l in range(grid.d)] for j in range(grid.d)]
                     for ci in c])
    vals = spectral_inverse(sc.reshape((-1,) + grid.spectral_shape), grid).values
    return vals.reshape((c.shape[0], grid.d, grid.d) + grid.shape)


def dealias(field):
    return spectral_inverse(field.spectral * field.grid.dealias_mask(), field.grid)


def transport(a: VectorField, b) -> VectorField:
    """Dealiased ``(a . grad) b`` for a vector field ``b``, i.e. sum_j a_j d_j b_i."""
    grid = a.grid
    mask = grid.dealias_mask()
    ks = grid.wavenumbers()
    av = spectral_inverse(a.spectral * mask, grid).values
    cb = b.spectral * mask
    if cb.ndim == grid.d:
        cb = cb[None]
    out = np.zeros((cb.shape[0],) + grid.shape)
    for j in range(grid.d):
        dj = spectral_inverse(np.array([1j * ks[j] * c for c in cb]), grid).values
        out += av[j] * dj
    prod = VectorField(grid, out)
    return spectral_inverse(prod.spectral * mask, grid)


def advection(u: VectorField) -> VectorField:
    """Pseudo-spectral ``(u . grad) u`` with 2/3-rule truncation."""
    return transport(u, u)


def absorbing_constant(delta: float) -> float:
    """Near-minimal constant for the exponential absorbing inequality.

    Returns ``C >= 1`` with ``|x|^delta exp(-|x|^2) <= C exp(-|x|^2 / C)`` for
    every ``x``: the smallest point of the geometric grid ``(1 + 1e-6) 1.01^j``
    at which the closed-form supremum of ``r^delta exp(-r^2 (1 - 1/C))`` is at
    most ``C``.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if delta == 0:
        return 1.0
    C = 1.0 + 1e-6
    while True:
        a = 1.0 - 1.0 / C
        r2 = delta / (2 * a)
        if r2 ** (delta / 2) * np.exp(-a * r2) <= C:
            return C
        C *= 1.01
