"""Experiment harnesses: energy inequality, remainder scaling, L^p probe of
the Leray projector and the 3D vorticity L^1 bound.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .grid_field import Grid, ScalarField, TimePartition, Trajectory, VectorField, lp_norm
from .operators import curl, gradient_tensor, laplacian, leray_project, transport
from .parametrix import PerturbedKernelContext, RemainderReport, norm_factors, remainder_report
from .solver import Forcing, forcing_integral, random_solenoidal, solve


def _clean(obj):
    """JSON-safe copy: NaN/inf become None, numpy scalars become floats."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# -- energy inequality ------------------------------------------------------

@dataclass
class EnergyReport:
    lhs: float
    rhs: float
    u0_norm: float
    forcing_integral: float
    T: float
    nu: float
    trajectory: Trajectory | None = field(default=None, repr=False, compare=False)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def holds(self, rtol: float = 1e-6) -> bool:
        return self.slack >= -rtol * self.rhs

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("trajectory")
        d["slack"] = self.slack
        return _clean(d)


def energy_check(u0: VectorField, forcing: Forcing | None, nu: float, T: float, dt: float,
                 save_every: int = 1) -> EnergyReport:
    """Run the solver and compare ``||u(T)||_2`` with ``||u0||_2 + int ||f||_2``.

    The forcing integral uses the midpoint rule at the solver step midpoints.
    """
    forcing = forcing or Forcing.zero()
    traj = solve(u0, forcing, nu, T, dt, save_every)
    nsteps = int(round(T / dt))
    fint = forcing_integral(forcing, u0.grid, 0.0, T, max(nsteps, 1), p=2)
    u0n = lp_norm(traj.fields[0], 2)
    return EnergyReport(lhs=lp_norm(traj.fields[-1], 2), rhs=u0n + fint, u0_norm=u0n,
                        forcing_integral=fint, T=T, nu=nu, trajectory=traj)


# -- remainder scaling --------------------------------------------------------

def fit_slope(x, y) -> tuple:
    """Least-squares slope and intercept of ``log y`` against ``log x``.

    Returns ``(nan, nan)`` when any ``y`` is not strictly positive.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or np.any(y <= 0) or not np.all(np.isfinite(y)):
        return float("nan"), float("nan")
    slope, icpt = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope), float(icpt)


@dataclass
class ScalingResult:
    n_list: list
    epsilon: float
    rows: list                 # every RemainderReport
    max_R: dict                # name -> list over n of max_k R_i
    slopes: dict               # name -> fitted slope of max_k R_i
    total_slopes: dict         # name -> slope of n * max_k R_i
    factors: tuple
    c_fit: float

    def as_dict(self) -> dict:
        return _clean({
            "n_list": self.n_list, "epsilon": self.epsilon, "max_R": self.max_R,
            "slopes": self.slopes, "total_slopes": self.total_slopes,
            "norm_factors": {"N1": self.factors[0], "N2": self.factors[1], "N3": self.factors[2]},
            "c_fit": self.c_fit,
        })


def scaling_study(ctx: PerturbedKernelContext, T: float, n_list, epsilon: float = 0.5,
                  m: int = 8, factors: tuple | None = None) -> ScalingResult:
    """Remainders at ``t = t_{k+1}`` on every slice for each ``n``.

    Fits the log-log slope of ``max_k R_i`` against ``n`` (per-slice rates)
    and of ``n * max_k R_i`` (rates after summing the slices). ``c_fit`` is
    the smallest constant making every measured remainder sit below its
    bound ``(T/n)^{3/2} N1`` or ``(T/n)^{1+epsilon/2} N_i``.
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 3:
        raise ValueError("scaling study needs at least three values of n")
    factors = factors if factors is not None else norm_factors(ctx.traj, epsilon)
    rows = []
    max_R = {"R1": [], "R2": [], "R3": []}
    c_fit = 0.0
    for n in n_list:
        part = TimePartition(T, n)
        best = dict.fromkeys(max_R, 0.0)
        for k in range(n):
            rep = remainder_report(ctx, part, k, None, epsilon, m, factors)
            rows.append(rep)
            for name in best:
                best[name] = max(best[name], getattr(rep, name))
            c_fit = max(c_fit, _ratio(rep.R1, (T / n) ** 1.5 * factors[0]),
                        _ratio(rep.R2, (T / n) ** (1 + epsilon / 2) * factors[1]),
                        _ratio(rep.R3, (T / n) ** (1 + epsilon / 2) * factors[2]))
        for name in best:
            max_R[name].append(best[name])
        ctx.clear()
    slopes = {k: fit_slope(n_list, v)[0] for k, v in max_R.items()}
    totals = {k: fit_slope(n_list, np.asarray(n_list) * np.asarray(v))[0] for k, v in max_R.items()}
    return ScalingResult(n_list, epsilon, rows, max_R, slopes, totals, factors, c_fit)


def _ratio(a, b):
    return a / b if b > 0 else 0.0


# -- L^p behaviour of the Leray projector -----------------------------------

@dataclass
class LpProbeResult:
    p: float
    samples: int
    max_ratio: float
    argmax: dict
    family_max: dict

    def as_dict(self) -> dict:
        return _clean(asdict(self))


def _random_field(grid, rng, band):
    kint = np.meshgrid(*([np.fft.fftfreq(grid.N, 1.0 / grid.N)] * grid.d), indexing="ij")
    keep = (np.sqrt(sum(k * k for k in kint)) <= band)
    shape = (grid.d,) + grid.shape
    c = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * keep
    return VectorField(grid, np.fft.ifftn(c, axes=tuple(range(1, grid.d + 1))).real)


def _random_scalar(grid, rng, band):
    return _random_field(grid, rng, band).component(0)


def _gradient_field(grid, rng, band, delta):
    from .operators import grad
    g = grad(_random_scalar(grid, rng, band))
    sol = random_solenoidal(grid, int(rng.integers(2 ** 31)), band, 1.0)
    gn = lp_norm(g, 2)
    return g * (1.0 / gn if gn else 1.0) + sol * delta


def _bump_field(grid, rng, width):
    x = grid.coords()
    c = rng.uniform(0, grid.L, grid.d)
    r2 = sum((np.mod(xi - ci + grid.L / 2, grid.L) - grid.L / 2) ** 2 for xi, ci in zip(x, c))
    bump = np.exp(-r2 / (2 * width ** 2))
    direction = rng.standard_normal(grid.d)
    direction /= np.linalg.norm(direction)
    return VectorField(grid, direction.reshape((-1,) + (1,) * grid.d) * bump)


LP_FAMILIES = ("random", "gradient", "bump")


def lp_probe(grid: Grid, p: float, samples: int = 1000, seed: int = 0,
             families=LP_FAMILIES, band: int = 6) -> LpProbeResult:
    """Largest ``||P phi||_p / ||phi||_p`` over a seeded family of test fields.

    Families cycle per sample: band-limited random fields; gradient-dominated
    ``grad g + delta * solenoidal`` with ``delta`` in ``{0, 0.1, 1}``; and
    localized Gaussian bumps of random width and direction.
    """
    if not p >= 1:
        raise ValueError("p must be >= 1")
    families = tuple(families)
    for f in families:
        if f not in LP_FAMILIES:
            raise ValueError(f"unknown family {f!r}")
    rng = np.random.default_rng(seed)
    deltas = (0.0, 0.1, 1.0)
    best = -1.0
    arg = {}
    fam_max = {f: 0.0 for f in families}
    for i in range(samples):
        fam = families[i % len(families)]
        desc = {"family": fam, "index": i}
        if fam == "random":
            phi = _random_field(grid, rng, band)
        elif fam == "gradient":
            delta = deltas[(i // len(families)) % len(deltas)]
            desc["delta"] = delta
            phi = _gradient_field(grid, rng, band, delta)
        else:
            width = float(rng.uniform(2 * grid.h, grid.L / 8))
            desc["width"] = width
            phi = _bump_field(grid, rng, width)
        denom = lp_norm(phi, p)
        if denom == 0:
            continue
        ratio = lp_norm(leray_project(phi), p) / denom
        fam_max[fam] = max(fam_max[fam], ratio)
        if ratio > best:
            best, arg = ratio, desc
    return LpProbeResult(p, samples, best, arg, fam_max)


# -- vorticity --------------------------------------------------------------

def _require_3d(field):
    if field.grid.d != 3:
        raise ValueError("vorticity tools need d = 3")


def vorticity(u: VectorField) -> VectorField:
    _require_3d(u)
    return curl(u)


def stretching(omega: VectorField, u: VectorField) -> VectorField:
    """Dealiased vortex stretching ``(omega . grad) u``."""
    _require_3d(u)
    return transport(omega, u)


def biot_savart(omega: VectorField, tol: float = 1e-12) -> VectorField:
    """Mean-zero divergence-free velocity whose curl is ``omega``.

    Raises when ``omega`` has a nonzero mean.
    """
    _require_3d(omega)
    grid = omega.grid
    c = omega.spectral
    scale = max(np.max(np.abs(c)), 1e-300)
    if np.max(np.abs(c[(slice(None),) + (0,) * grid.d])) > tol * scale * grid.size:
        raise ValueError("Biot-Savart needs a mean-zero vorticity")
    ks = grid.wavenumbers()
    k2 = grid.k2().copy()
    k2.flat[0] = 1.0
    # u = curl(-Laplacian^{-1} omega): u_hat = i k x omega_hat / |k|^2
    out = np.array([
        1j * (ks[1] * c[2] - ks[2] * c[1]),
        1j * (ks[2] * c[0] - ks[0] * c[2]),
        1j * (ks[0] * c[1] - ks[1] * c[0]),
    ]) / k2
    out[(slice(None),) + (0,) * grid.d] = 0
    from .grid_field import spectral_inverse
    return spectral_inverse(out, grid)


def vorticity_rhs(u: VectorField, nu: float, curl_f: VectorField | None = None) -> VectorField:
    """``-u.grad omega + nu Laplacian omega + omega.grad u (+ curl f)``."""
    w = vorticity(u)
    rhs = -transport(u, w) + laplacian(w) * nu + stretching(w, u)
    if curl_f is not None:
        rhs = rhs + curl_f
    return rhs


def vorticity_residual_check(traj: Trajectory, forcing: Forcing | None = None) -> dict:
    """Centred time difference of the vorticity against its PDE right-hand side.

    Returns the largest L^2 residual over interior snapshots, absolute and
    relative to ``max_j ||omega_j||_2``.
    """
    _require_3d(traj.fields[0])
    if len(traj) < 3:
        raise ValueError("need at least three snapshots")
    forcing = forcing or Forcing.zero()
    ws = [vorticity(u) for u in traj.fields]
    worst = 0.0
    for j in range(1, len(traj) - 1):
        t = traj.times[j]
        dwdt = (ws[j + 1] - ws[j - 1]) / (2 * traj.dt)
        cf = None if forcing.is_zero else curl(forcing(t, traj.grid))
        worst = max(worst, lp_norm(dwdt - vorticity_rhs(traj.fields[j], traj.nu, cf), 2))
    scale = max(lp_norm(w, 2) for w in ws)
    return {"max_residual": worst, "max_vorticity_L2": scale,
            "relative": worst / scale if scale > 0 else 0.0}


@dataclass
class VorticityReport:
    lhs: float
    omega0_L1: float
    curl_f_L1T: float
    dirichlet_L2T: float
    grad_omega_L1T: float
    u0_L1: float
    f_L1T_L1: float
    u0_L2: float
    f_L1T_L2: float
    enstrophy_identity_gap: float
    # (t, |omega|_1, |grad u|_2^2, |grad omega|_1) per snapshot
    series: list | None = field(default=None, repr=False, compare=False)

    @property
    def bound(self) -> float:
        return self.omega0_L1 + self.curl_f_L1T + self.dirichlet_L2T

    @property
    def slack(self) -> float:
        return self.bound - self.lhs

    @property
    def c_fit_statement(self) -> float:
        """Smallest ``C`` for ``lhs <= |u0|_1 + int|f|_1 + C (|u0|_2 + int|f|_2)``."""
        denom = self.u0_L2 + self.f_L1T_L2
        excess = self.lhs - self.u0_L1 - self.f_L1T_L1
        if excess <= 0:
            return 0.0
        return excess / denom if denom > 0 else float("inf")

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("series")
        d.update(bound=self.bound, slack=self.slack, c_fit_statement=self.c_fit_statement)
        return _clean(d)


def _trapezoid(values, dt):
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        return 0.0
    return float(dt * (np.sum(v) - 0.5 * (v[0] + v[-1])))


def vorticity_l1_check(u0: VectorField, forcing: Forcing | None, nu: float, T: float, dt: float,
                       save_every: int = 1, traj: Trajectory | None = None) -> VorticityReport:
    """Terms of the explicit torus bound
    ``||omega(T)||_1 <= ||omega0||_1 + int ||curl f||_1 + int ||grad u||_2^2``.

    Dirichlet and ``||grad omega||_1`` integrals use the trapezoid rule on
    the stored snapshots; forcing integrals use step midpoints.
    """
    _require_3d(u0)
    forcing = forcing or Forcing.zero()
    if traj is None:
        traj = solve(u0, forcing, nu, T, dt, save_every)
    grid = u0.grid
    nsteps = max(int(round(T / dt)), 1)
    dir_vals, gw_vals, series, gap = [], [], [], 0.0
    for t, u in zip(traj.times, traj.fields):
        w = vorticity(u)
        gu = lp_norm(VectorField(grid, gradient_tensor(u).reshape((-1,) + grid.shape)), 2)
        gw = lp_norm(VectorField(grid, gradient_tensor(w).reshape((-1,) + grid.shape)), 1)
        dir_vals.append(gu ** 2)
        gw_vals.append(gw)
        wn = lp_norm(w, 2)
        series.append((float(t), lp_norm(w, 1), gu ** 2, gw))
        if gu > 0:
            gap = max(gap, abs(wn - gu) / gu)
    return VorticityReport(
        lhs=lp_norm(vorticity(traj.fields[-1]), 1),
        omega0_L1=lp_norm(vorticity(traj.fields[0]), 1),
        curl_f_L1T=forcing_integral(forcing, grid, 0.0, T, nsteps, p=1, transform=curl),
        dirichlet_L2T=_trapezoid(dir_vals, traj.dt),
        grad_omega_L1T=_trapezoid(gw_vals, traj.dt),
        u0_L1=lp_norm(traj.fields[0], 1),
        f_L1T_L1=forcing_integral(forcing, grid, 0.0, T, nsteps, p=1),
        u0_L2=lp_norm(traj.fields[0], 2),
        f_L1T_L2=forcing_integral(forcing, grid, 0.0, T, nsteps, p=2),
        enstrophy_identity_gap=gap,
        series=series,
    )
