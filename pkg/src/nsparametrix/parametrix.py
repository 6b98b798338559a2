"""Frozen-point parametrix: perturbed heat kernel, its semigroup and Green
operators, the per-slice Duhamel reconstruction and the three remainders.

For a frozen point ``(t, x)`` the perturbed kernel is the wrapped Gaussian of
variance ``2 nu (t - s)`` centred at the characteristic foot
``theta_{s,t}(x)``. Integrating it against a band-limited field ``g`` gives
``(exp(nu (t-s) Laplacian) g)(theta_{s,t}(x))`` exactly, which is what the
default ``"spectral"`` method evaluates. The ``"stencil"`` method sums the
Gaussian over grid nodes within ``radius_factor`` standard deviations
instead, falling back to a point mass once ``t - s < h^2 / (100 nu)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .flow import flow_sweep
from .grid_field import (
    Grid, ScalarField, TimePartition, Trajectory, VectorField, evaluate_offgrid,
    evaluate_trimmed, eval_coefficients, lp_norm,
)
from .operators import (
    HeatKernelParams, advection, gradient_tensor, heat_kernel_point, heat_multiplier,
    heat_semigroup, leray_project, midpoint_nodes, xi_apply,
)
from .solver import Forcing, hypothesis_norms


class QuadratureError(ArithmeticError):
    """A frozen-point quadrature produced non-finite values."""


def _key(x: float) -> float:
    return round(float(x), 13)


class PerturbedKernelContext:
    """Trajectory plus the cached characteristic feet ``theta_{s,t}(x)``.

    Parameters
    ----------
    traj : Trajectory
        Reference solution supplying ``u``.
    nu : float, optional
        Kernel viscosity; defaults to ``traj.nu``.
    h_ode : float
        RK4 step for the characteristics.
    sign : int
        Flow orientation passed to :func:`flow.flow_sweep`. ``-1`` (default)
        centres the kernel where the frozen-velocity transport actually
        carries mass, which makes the Duhamel formula exact.
    method : {"spectral", "stencil"}
        How Gaussian integrals against grid fields are evaluated.
    """

    def __init__(self, traj: Trajectory, nu: float | None = None, h_ode: float = 1e-2,
                 sign: int = -1, method: str = "spectral", radius_factor: float = 6.0):
        if method not in ("spectral", "stencil"):
            raise ValueError(f"unknown method {method!r}")
        self.traj = traj
        self.grid: Grid = traj.grid
        self.nu = traj.nu if nu is None else nu
        if not self.nu > 0:
            raise ValueError("kernel needs nu > 0")
        self.h_ode = h_ode
        self.sign = sign
        self.method = method
        self.radius_factor = radius_factor
        self._nodes = self.grid.points()
        self._feet = {}

    def feet(self, s_list, t: float) -> np.ndarray:
        """Unwrapped ``theta_{s,t}(x)`` at every grid node, shape ``(len(s), M, d)``."""
        s_list = [float(s) for s in s_list]
        missing = sorted({s for s in s_list if (_key(t), _key(s)) not in self._feet})
        missing = [s for s in missing if s < t]
        if missing:
            pos = flow_sweep(self.traj, t, missing, self._nodes, self.h_ode, self.sign)
            for s, p in zip(missing, pos):
                self._feet[(_key(t), _key(s))] = p
        out = []
        for s in s_list:
            if s >= t:
                out.append(self._nodes)
            else:
                out.append(self._feet[(_key(t), _key(s))])
        return np.array(out)

    def clear(self):
        self._feet.clear()

    def average(self, fields, centers: np.ndarray, tau: float) -> tuple:
        """Gaussian averages of ``fields`` with variance ``2 nu tau`` at ``centers``.

        Returns ``(values (M, C), first moments (M, d) or None)``; ``None``
        means the first moment vanishes identically.
        """
        grid = self.grid
        fields = list(fields)
        if self.method == "spectral":
            coef = np.concatenate([eval_coefficients(f) for f in fields])
            if tau > 0:
                coef = coef * heat_multiplier(grid, self.nu, tau)
            return evaluate_trimmed(coef, grid, centers), None
        vals = np.concatenate([f.values.reshape((-1,) + grid.shape) for f in fields])
        centers = np.ascontiguousarray(np.mod(centers, grid.L))
        if tau < grid.h ** 2 / (100 * self.nu):
            coef = np.concatenate([eval_coefficients(f) for f in fields])
            return evaluate_trimmed(coef, grid, centers), np.zeros_like(centers)
        sigma = math.sqrt(2 * self.nu * tau)
        # never let the stencil miss every node
        radius = max(self.radius_factor * sigma, 0.51 * grid.h * math.sqrt(grid.d))
        kern = kernels.gaussian_average_2d if grid.d == 2 else kernels.gaussian_average_3d
        avg, mom, _ = kern(np.ascontiguousarray(vals), centers, sigma, grid.h, radius)
        return avg, mom


def _grid_field(grid: Grid, flat: np.ndarray):
    """(M, C) point values at the grid nodes -> field."""
    if flat.ndim == 1 or flat.shape[1] == 1:
        return ScalarField(grid, flat.reshape(grid.shape))
    return VectorField(grid, flat.T.reshape((flat.shape[1],) + grid.shape))


def perturbed_kernel(ctx: PerturbedKernelContext, s: float, t: float, x, y):
    """Perturbed heat kernel with frozen point ``(t, x)`` evaluated at ``y``.

    ``x`` is one point ``(d,)``; ``y`` is ``(d,)`` or ``(M, d)``.
    """
    if not s < t:
        raise ValueError(f"perturbed kernel needs s < t, got s={s}, t={t}")
    x = np.asarray(x, dtype=float)
    center = flow_sweep(ctx.traj, t, [s], x, ctx.h_ode, ctx.sign)[0][0]
    params = HeatKernelParams(ctx.nu, ctx.grid.d)
    return heat_kernel_point(params, t - s, np.asarray(y, dtype=float) - center, ctx.grid.L)


def hat_P_apply(ctx: PerturbedKernelContext, g, r: float, t: float):
    """Perturbed semigroup: ``x -> int p(r, t, x, y) g(y) dy`` on the grid."""
    if r > t:
        raise ValueError("need r <= t")
    if r == t:
        return g
    centers = ctx.feet([r], t)[0]
    vals, _ = ctx.average([g], centers, t - r)
    return _grid_field(ctx.grid, vals)


def hat_G_apply(ctx: PerturbedKernelContext, psi, r: float, t: float, m: int = 16):
    """Perturbed Green operator ``x -> int_r^t int p(s, t, x, y) psi(s, y) dy ds``.

    ``psi`` is a field or a callable ``s -> field``; midpoint rule in time.
    """
    if r > t:
        raise ValueError(f"need r <= t, got r={r}, t={t}")
    psi_fn = psi if callable(psi) else (lambda s: psi)
    if r == t:
        return psi_fn(t) * 0.0
    nodes, ds = midpoint_nodes(r, t, m)
    feet = ctx.feet(nodes, t)
    acc = 0.0
    for s, centers in zip(nodes, feet):
        vals, _ = ctx.average([psi_fn(s)], centers, t - s)
        acc = acc + vals
    out = _grid_field(ctx.grid, acc * ds)
    return out


def _check_slice(partition: TimePartition, k: int, t: float) -> tuple:
    tk, tk1 = partition.slice(k)
    tol = 1e-12 * max(1.0, partition.T)
    if not (tk < t <= tk1 + tol):
        raise ValueError(f"t={t} is not in the slice ({tk}, {tk1}]")
    return tk, tk1


def _foot(ctx, s, t, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if s >= t:
        return x
    return flow_sweep(ctx.traj, t, [s], x, ctx.h_ode, ctx.sign)[0]


def u_delta_term(ctx: PerturbedKernelContext, partition: TimePartition, k: int, t: float):
    """Integrand of the frozen-velocity increment term for slice ``k``.

    Returns ``f(s, x, y)`` giving ``(u(s, theta_{s,t}(x)) - u(s, y)) . grad u(s, y)``
    at points ``y`` (``(M, d)``) for one frozen point ``x``.
    """
    _check_slice(partition, k, t)
    traj = ctx.traj

    def integrand(s, x, y):
        u = traj.at(s)
        y = np.atleast_2d(np.asarray(y, dtype=float))
        c = evaluate_offgrid(u, _foot(ctx, s, t, x))[0]
        uy = evaluate_offgrid(u, y)
        G = gradient_tensor(u)
        Gy = evaluate_offgrid(VectorField(ctx.grid, G.reshape((-1,) + ctx.grid.shape)), y)
        Gy = Gy.reshape(-1, ctx.grid.d, ctx.grid.d)
        return np.einsum("mj,mij->mi", c[None, :] - uy, Gy)

    return integrand


def xi_advection(traj: Trajectory, s: float) -> VectorField:
    """Gradient (pressure) part of ``(u . grad) u`` at time ``s``."""
    return xi_apply(advection(traj.at(s)))


def _min_image(v: np.ndarray, L: float) -> np.ndarray:
    return v - L * np.round(v / L)


def xi_delta2(ctx: PerturbedKernelContext, partition: TimePartition, k: int, t: float,
              first_order: bool = True):
    """Second-order Taylor remainder of the pressure term around the foot.

    Returns ``f(s, x, y)``: ``Xi(s, y) - Xi(s, theta) - (y - theta) . grad Xi(s, theta)``
    with ``theta = theta_{s,t}(x)`` and the minimal-image displacement.
    ``first_order=False`` drops the gradient correction.
    """
    _check_slice(partition, k, t)
    grid = ctx.grid

    def integrand(s, x, y):
        xi = xi_advection(ctx.traj, s)
        y = np.atleast_2d(np.asarray(y, dtype=float))
        theta = _foot(ctx, s, t, x)[0]
        out = evaluate_offgrid(xi, y) - evaluate_offgrid(xi, theta)[None, :]
        if first_order:
            G = VectorField(grid, gradient_tensor(xi).reshape((-1,) + grid.shape))
            Gt = evaluate_offgrid(G, theta).reshape(grid.d, grid.d)
            out = out - _min_image(y - theta, grid.L) @ Gt.T
        return out

    return integrand


TERM_NAMES = ("semigroup", "forcing", "u_delta", "xi_delta2", "xi_shift")


@dataclass
class DuhamelResult:
    field: VectorField
    terms: list
    raw_norms: dict
    projected_norms: dict

    def error(self, reference: VectorField) -> float:
        return lp_norm(self.field - reference, 2) / lp_norm(reference, 2)


def duhamel_reconstruct(ctx: PerturbedKernelContext, partition: TimePartition, k: int, t: float,
                        m: int = 8, forcing: Forcing | None = None,
                        first_order: bool = True) -> DuhamelResult:
    """Rebuild ``u(t)`` on slice ``k`` from the five frozen-point Duhamel terms.

    Each term is assembled on the grid at the diagonal ``(tau, xi) = (t, x)``,
    then Leray-projected; their sum approximates ``u(t, .)``. Time integrals
    use ``m`` midpoint subintervals on ``[t_k, t]``.
    """
    tk, _ = _check_slice(partition, k, t)
    traj = ctx.traj
    grid = ctx.grid
    d = grid.d
    M = grid.size
    nodes, ds = midpoint_nodes(tk, t, m)
    feet = ctx.feet(list(nodes) + [tk], t)
    x = ctx._nodes

    # semigroup term on the slice datum
    v1, _ = ctx.average([traj.at(tk)], feet[-1], t - tk)

    v2 = np.zeros((M, d))
    v3 = np.zeros((M, d))
    v4 = np.zeros((M, d))
    v5 = np.zeros((M, d))
    forced = forcing is not None and not forcing.is_zero
    for s, th in zip(nodes, feet[:-1]):
        tau = t - s
        u = traj.at(s)
        adv = advection(u)
        xi = xi_apply(adv)
        G = VectorField(grid, gradient_tensor(u).reshape((-1,) + grid.shape))
        avg, mom = ctx.average([G, adv, xi], th, tau)
        avg_G = avg[:, :d * d].reshape(M, d, d)
        avg_adv = avg[:, d * d:d * d + d]
        avg_xi = avg[:, d * d + d:]
        pts = evaluate_trimmed(np.concatenate([eval_coefficients(u), eval_coefficients(xi)]),
                               grid, th)
        u_th = pts[:, :d]
        xi_th = pts[:, d:]
        v3 += np.einsum("mj,mij->mi", u_th, avg_G) - avg_adv
        r4 = avg_xi - xi_th
        if first_order and mom is not None:
            gxi = VectorField(grid, gradient_tensor(xi).reshape((-1,) + grid.shape))
            gxi_th = evaluate_offgrid(gxi, th).reshape(M, d, d)
            r4 -= np.einsum("mj,mij->mi", mom, gxi_th)
        v4 += r4
        v5 += xi_th - xi.values.reshape(d, -1).T
        if forced:
            v2 += ctx.average([leray_project(forcing(s, grid))], th, tau)[0]
    raw = [v1, v2 * ds, v3 * ds, v4 * ds, v5 * ds]
    if not all(np.all(np.isfinite(v)) for v in raw):
        raise QuadratureError(f"non-finite Duhamel term on slice {k} at t={t}")
    raw_fields = [_grid_field(grid, v) for v in raw]
    projected = [leray_project(f) for f in raw_fields]
    total = projected[0]
    for p in projected[1:]:
        total = total + p
    return DuhamelResult(
        field=total,
        terms=projected,
        raw_norms={n: lp_norm(f, 2) for n, f in zip(TERM_NAMES, raw_fields)},
        projected_norms={n: lp_norm(f, 2) for n, f in zip(TERM_NAMES, projected)},
    )


# -- remainders --------------------------------------------------------------

def _remainder_nodes(partition, k, t, m):
    tk, _ = _check_slice(partition, k, t)
    return midpoint_nodes(tk, t, m)


def remainder_R1(ctx: PerturbedKernelContext, partition: TimePartition, k: int, t: float,
                 m: int = 16) -> float:
    """L^2 norm of ``x -> int int p~(s,t,x,y) (u(s,y) - u(s,x)) . grad u(s,y) dy ds``.

    With the unperturbed kernel the space integral is the heat semigroup, so
    the integrand is ``H[(u.grad)u] - sum_j u_j H[d_j u]`` evaluated exactly.
    """
    nodes, ds = _remainder_nodes(partition, k, t, m)
    grid = ctx.grid
    d = grid.d
    acc = np.zeros((d,) + grid.shape)
    for s in nodes:
        u = ctx.traj.at(s)
        G = VectorField(grid, gradient_tensor(u).reshape((-1,) + grid.shape))
        HG = heat_semigroup(G, ctx.nu, t - s).values.reshape((d, d) + grid.shape)
        Hadv = heat_semigroup(advection(u), ctx.nu, t - s).values
        acc += Hadv - np.einsum("j...,ij...->i...", u.values, HG)
    return lp_norm(VectorField(grid, acc * ds), 2)


def remainder_R2(ctx: PerturbedKernelContext, partition: TimePartition, k: int, t: float,
                 m: int = 16, epsilon: float = 0.5, first_order: bool = True) -> float:
    """L^2 norm of the kernel-averaged second-order Taylor remainder of the
    pressure term, centred at ``x``.

    The symmetric kernel has zero first moment, so ``first_order`` does not
    change the value; the flag is kept so both variants can be reported.
    """
    _epsilon_ok(epsilon)
    nodes, ds = _remainder_nodes(partition, k, t, m)
    grid = ctx.grid
    acc = np.zeros((grid.d,) + grid.shape)
    for s in nodes:
        xi = xi_advection(ctx.traj, s)
        acc += heat_semigroup(xi, ctx.nu, t - s).values - xi.values
        # first-moment correction: int p~(s,t,x,y) (y - x) dy = 0 exactly
    return lp_norm(VectorField(grid, acc * ds), 2)


def remainder_R3(ctx: PerturbedKernelContext, partition: TimePartition, k: int, t: float,
                 m: int = 16, epsilon: float = 0.5) -> float:
    """L^2 norm of ``x -> int (Xi(s, theta_{s,t}(x)) - Xi(s, x)) ds``."""
    _epsilon_ok(epsilon)
    nodes, ds = _remainder_nodes(partition, k, t, m)
    grid = ctx.grid
    feet = ctx.feet(nodes, t)
    acc = np.zeros((grid.size, grid.d))
    for s, th in zip(nodes, feet):
        xi = xi_advection(ctx.traj, s)
        acc += evaluate_trimmed(eval_coefficients(xi), grid, th) - xi.values.reshape(grid.d, -1).T
    return lp_norm(_grid_field(grid, acc * ds), 2)


def _epsilon_ok(epsilon):
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")


def norm_factors(traj: Trajectory, epsilon: float = 0.5, norms: dict | None = None) -> tuple:
    """Norm products multiplying the slice-length powers in the three bounds.

    ``N1 = |grad u|_inf |grad u|_2``;
    ``N2 = |hess Xi|_inf^(e/2) (|u|_inf |grad u|_q + |u|_inf |hess u|_q
    + |grad u|_inf |grad u|_q)^((2-e)/2)``;
    ``N3 = |grad Xi|_inf^(e/2) |u|_inf^(e/2) |u|_q^((2-e)/2) |grad u|_inf^((2-e)/2)``,
    with ``q = 2 - e`` and every norm a supremum over time. Constants are
    left out.
    """
    _epsilon_ok(epsilon)
    n = norms if norms is not None else hypothesis_norms(traj, None, epsilon)
    e = epsilon
    a, b = e / 2, (2 - e) / 2
    N1 = n["grad_u_Linf"] * n["grad_u_L2"]
    inner = (n["u_Linf"] * n["grad_u_L2-eps"] + n["u_Linf"] * n["hess_u_L2-eps"]
             + n["grad_u_Linf"] * n["grad_u_L2-eps"])
    N2 = n["hess_xi_Linf"] ** a * inner ** b
    N3 = n["grad_xi_Linf"] ** a * n["u_Linf"] ** a * n["u_L2-eps"] ** b * n["grad_u_Linf"] ** b
    return float(N1), float(N2), float(N3)


@dataclass
class RemainderReport:
    n: int
    k: int
    t: float
    R1: float
    R2: float
    R3: float
    N1: float
    N2: float
    N3: float
    epsilon: float

    CSV_COLUMNS = ("n", "k", "t", "R1", "R2", "R3", "N1", "N2", "N3", "epsilon")

    def __post_init__(self):
        for name in ("R1", "R2", "R3", "N1", "N2", "N3"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name}={v} must be finite and >= 0")

    def row(self) -> list:
        return [getattr(self, c) for c in self.CSV_COLUMNS]

    def as_dict(self) -> dict:
        return asdict(self)


def remainder_report(ctx: PerturbedKernelContext, partition: TimePartition, k: int,
                     t: float | None = None, epsilon: float = 0.5, m: int = 16,
                     factors: tuple | None = None) -> RemainderReport:
    """All three remainders on slice ``k`` (default ``t = t_{k+1}``)."""
    t = partition.slice(k)[1] if t is None else t
    N1, N2, N3 = factors if factors is not None else norm_factors(ctx.traj, epsilon)
    return RemainderReport(
        n=partition.n, k=k, t=t,
        R1=remainder_R1(ctx, partition, k, t, m),
        R2=remainder_R2(ctx, partition, k, t, m, epsilon),
        R3=remainder_R3(ctx, partition, k, t, m, epsilon),
        N1=N1, N2=N2, N3=N3, epsilon=epsilon,
    )
