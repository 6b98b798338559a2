"""Reference pseudo-spectral solver for the projected Navier-Stokes equation

    d_t u + P[(u . grad) u] = nu Laplacian(u) + P f

on the periodic torus, plus the closed-form data used as oracles.

Time stepping is integrating-factor RK4: diffusion is applied exactly per
mode, the projected nonlinearity and forcing are integrated with RK4, and
every stage is re-projected.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .grid_field import (
    Grid, Trajectory, VectorField, lp_norm, read_snapshot, spectral_inverse,
    write_snapshot,
)
from .operators import (
    _leray_coeffs, advection, gradient_tensor, hessian_tensor, leray_project, xi_apply,
)

log = logging.getLogger(__name__)


class SolverInstability(RuntimeError):
    """Unforced energy grew by more than a factor of ten."""


def taylor_green_2d(grid: Grid, t: float = 0.0, nu: float = 0.0) -> VectorField:
    """Decaying 2D Taylor-Green vortex, an exact Navier-Stokes solution."""
    if grid.d != 2:
        raise ValueError("taylor_green_2d needs a 2D grid")
    x, y = grid.coords()
    a = np.exp(-2 * nu * t)
    return VectorField(grid, np.stack([a * np.cos(x) * np.sin(y), -a * np.sin(x) * np.cos(y)]))


def taylor_green_3d_init(grid: Grid) -> VectorField:
    if grid.d != 3:
        raise ValueError("taylor_green_3d_init needs a 3D grid")
    x, y, z = grid.coords()
    return VectorField(grid, np.stack([
        np.cos(x) * np.sin(y) * np.sin(z),
        -np.sin(x) * np.cos(y) * np.sin(z),
        np.zeros(grid.shape),
    ]))


def random_solenoidal(grid: Grid, seed: int, band: float, amplitude: float) -> VectorField:
    """Seeded band-limited divergence-free field with mean zero and given L^2 norm.

    Coefficients are drawn for ``0 < |k| <= band``, made Hermitian by taking
    the real part of the inverse transform, then Leray-projected and scaled.
    """
    if band >= grid.N / 3:
        raise ValueError(f"band {band} conflicts with 2/3 dealiasing at N={grid.N}")
    if band < 1:
        raise ValueError("band must be >= 1")
    rng = np.random.default_rng(seed)
    shape = (grid.d,) + grid.shape
    kint = np.meshgrid(*([np.fft.fftfreq(grid.N, 1.0 / grid.N)] * grid.d), indexing="ij")
    kmag = np.sqrt(sum(k * k for k in kint))
    keep = (kmag > 0) & (kmag <= band)
    coeffs = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * keep
    axes = tuple(range(1, grid.d + 1))
    vals = np.fft.ifftn(coeffs, axes=axes).real
    u = leray_project(VectorField(grid, vals))
    norm = lp_norm(u, 2)
    if norm == 0:
        raise ValueError("band contains no nonzero modes")
    return u * (amplitude / norm)


@dataclass
class Forcing:
    """Solenoidal forcing ``f(t) = profile(t) * F``.

    ``kind`` is ``"zero"``, ``"field"`` (a given field ``F``) or ``"random"``
    (``F`` drawn by :func:`random_solenoidal` from ``seed``, ``band``,
    ``amplitude``). ``profile`` is ``"constant"``, ``"sin"`` or ``"cos"`` with
    angular frequency ``omega``. ``F`` is always Leray-projected.
    """

    kind: str = "zero"
    profile: str = "constant"
    omega: float = 1.0
    seed: int = 0
    band: float = 2.0
    amplitude: float = 1.0
    base: VectorField | None = dc_field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("zero", "field", "random"):
            raise ValueError(f"unknown forcing kind {self.kind!r}")
        if self.profile not in ("constant", "sin", "cos"):
            raise ValueError(f"unknown forcing profile {self.profile!r}")
        if self.kind == "field":
            if self.base is None:
                raise ValueError("field forcing needs a base field")
            self.base = leray_project(self.base)

    @classmethod
    def zero(cls) -> "Forcing":
        return cls()

    def bind(self, grid: Grid) -> "Forcing":
        """Materialise the spatial pattern on ``grid``."""
        if self.kind == "random" and (self.base is None or self.base.grid != grid):
            self.base = random_solenoidal(grid, self.seed, self.band, self.amplitude)
        return self

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.amplitude == 0 and self.kind == "random"

    def scale(self, t: float) -> float:
        if self.profile == "sin":
            return float(np.sin(self.omega * t))
        if self.profile == "cos":
            return float(np.cos(self.omega * t))
        return 1.0

    def __call__(self, t: float, grid: Grid) -> VectorField:
        if self.kind == "zero":
            return VectorField.zeros(grid)
        self.bind(grid)
        return self.base * self.scale(t)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "profile": self.profile, "omega": self.omega,
                "seed": self.seed, "band": self.band, "amplitude": self.amplitude}


def default_dt(u0: VectorField) -> float:
    """Advective CFL step ``0.25 h / ||u0||_inf``; diffusion needs no limit."""
    umax = lp_norm(u0, np.inf)
    return 0.25 * u0.grid.h / umax if umax > 0 else 0.25 * u0.grid.h


def _nonlinear(u_hat, grid, f_hat):
    u = spectral_inverse(u_hat, grid)
    rhs = -advection(u).spectral
    if f_hat is not None:
        rhs = rhs + f_hat
    return _leray_coeffs(grid, rhs)


def solve(u0: VectorField, forcing: Forcing | None, nu: float, T: float, dt: float | None = None,
          save_every: int = 1) -> Trajectory:
    """Integrate from ``u0`` (projected on entry) up to time ``T``.

    ``T / dt`` must be an integer. Snapshots are stored every ``save_every``
    steps, including both end points.
    """
    grid = u0.grid
    forcing = forcing or Forcing.zero()
    forcing.bind(grid)
    dt = default_dt(u0) if dt is None else dt
    if not dt > 0 or not T >= 0:
        raise ValueError("need dt > 0 and T >= 0")
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not a multiple of dt={dt}")
    if nsteps % save_every:
        raise ValueError("step count must be a multiple of save_every")
    u0 = leray_project(u0)
    e_half = np.exp(-nu * grid.k2() * dt / 2)
    e_full = e_half * e_half
    u_hat = u0.spectral.copy()
    unforced = forcing.is_zero
    norm0 = lp_norm(u0, 2)

    def f_hat(t):
        return None if unforced else forcing(t, grid).spectral

    snapshots = [u0]
    for n in range(nsteps):
        t = n * dt
        fh0, fh1, fh2 = f_hat(t), f_hat(t + dt / 2), f_hat(t + dt)
        k1 = _nonlinear(u_hat, grid, fh0)
        k2 = _nonlinear(e_half * (u_hat + dt / 2 * k1), grid, fh1)
        k3 = _nonlinear(e_half * u_hat + dt / 2 * k2, grid, fh1)
        k4 = _nonlinear(e_full * u_hat + dt * e_half * k3, grid, fh2)
        u_hat = e_full * u_hat + dt / 6 * (e_full * k1 + 2 * e_half * (k2 + k3) + k4)
        u_hat = _leray_coeffs(grid, u_hat)
        if not np.all(np.isfinite(u_hat)):
            raise SolverInstability(f"non-finite state at step {n + 1}")
        if (n + 1) % save_every == 0:
            u = spectral_inverse(u_hat, grid)
            if unforced and norm0 > 0 and lp_norm(u, 2) > 10 * norm0:
                raise SolverInstability(
                    f"energy grew tenfold by t={(n + 1) * dt:.4g}; reduce dt (now {dt})")
            snapshots.append(u)
    log.debug("solved %d steps on %s", nsteps, grid)
    return Trajectory(snapshots, 0.0, dt * save_every, nu)


def _max_over(traj, fn):
    return max((fn(u) for u in traj.fields), default=0.0)


def _tensor_norm(grid, tensor, p):
    # pointwise Frobenius magnitude, flattened into a vector field
    vf = VectorField(grid, tensor.reshape((-1,) + grid.shape))
    return lp_norm(vf, p)


NORM_KEYS = (
    "u_Linf", "grad_u_Linf", "grad_u_L2", "grad_u_L2-eps", "hess_u_L2-eps",
    "grad_xi_Linf", "hess_xi_Linf", "u_L2-eps", "xi_L2-eps",
)


def hypothesis_norms(traj: Trajectory, forcing: Forcing | None = None,
                     epsilon: float = 0.5, stride: int = 1) -> dict:
    """Sup-in-time norms entering the remainder bounds.

    Keys (``xi`` is the gradient part of ``(u . grad) u``):
    ``u_Linf``, ``grad_u_Linf``, ``grad_u_L2``, ``grad_u_L2-eps``,
    ``hess_u_L2-eps``, ``grad_xi_Linf``, ``hess_xi_Linf``, ``u_L2-eps``,
    ``xi_L2-eps`` and, when forcing is given, ``f_L1T_L2`` (midpoint rule
    on the snapshot spacing). ``L2-eps`` means the ``L^{2-epsilon}`` norm.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    grid = traj.grid
    q = 2 - epsilon
    out = dict.fromkeys(NORM_KEYS, 0.0)
    for u in traj.fields[::stride]:
        gu = gradient_tensor(u)
        hu = hessian_tensor(u)
        xi = xi_apply(advection(u))
        gxi = gradient_tensor(xi)
        hxi = hessian_tensor(xi)
        vals = {
            "u_Linf": lp_norm(u, np.inf),
            "grad_u_Linf": _tensor_norm(grid, gu, np.inf),
            "grad_u_L2": _tensor_norm(grid, gu, 2),
            "grad_u_L2-eps": _tensor_norm(grid, gu, q),
            "hess_u_L2-eps": _tensor_norm(grid, hu, q),
            "grad_xi_Linf": _tensor_norm(grid, gxi, np.inf),
            "hess_xi_Linf": _tensor_norm(grid, hxi, np.inf),
            "u_L2-eps": lp_norm(u, q),
            "xi_L2-eps": lp_norm(xi, q),
        }
        for k, v in vals.items():
            out[k] = max(out[k], v)
    if forcing is not None:
        out["f_L1T_L2"] = forcing_integral(forcing, grid, traj.t0, traj.horizon,
                                           max(len(traj) - 1, 1), p=2)
    return out


def forcing_integral(forcing: Forcing, grid: Grid, t0: float, t1: float, m: int,
                     p: float = 2, transform=None) -> float:
    """Composite midpoint rule for ``int_{t0}^{t1} ||transform(f(s))||_p ds``."""
    if forcing.is_zero or t1 <= t0:
        return 0.0
    ds = (t1 - t0) / m
    total = 0.0
    for j in range(m):
        f = forcing(t0 + (j + 0.5) * ds, grid)
        if transform is not None:
            f = transform(f)
        total += lp_norm(f, p)
    return total * ds


# -- trajectory directories -------------------------------------------------

def save_trajectory(traj: Trajectory, path, forcing: Forcing | None = None, seed=None,
                    extra: dict | None = None) -> None:
    """Write ``manifest.json`` and one snapshot file per stored time."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    g = traj.grid
    manifest = {
        "schema": 1, "d": g.d, "N": g.N, "L": g.L, "nu": traj.nu, "t0": traj.t0,
        "dt": traj.dt, "count": len(traj),
        "forcing": (forcing or Forcing.zero()).to_dict(), "seed": seed,
    }
    if extra:
        manifest.update(extra)
    for j, (u, t) in enumerate(zip(traj.fields, traj.times)):
        write_snapshot(path / f"snapshot_{j:05d}.bin", u, float(t))
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_trajectory(path) -> Trajectory:
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    fields = [read_snapshot(path / f"snapshot_{j:05d}.bin", vector=True)[0]
              for j in range(manifest["count"])]
    return Trajectory(fields, manifest["t0"], manifest["dt"], manifest["nu"])
