"""Batch experiment runner.

    nsparametrix <subcommand> [--config FILE] [--out DIR] [--threads N]
                 [--seed-override S] [--epsilon E] [--n-list 2,4,8]

Every run writes into its output directory:

``config.ini``
    The full effective configuration. Passing it back through ``--config``
    reproduces the run.
``manifest.json``
    Subcommand, package version, kernel backend and the list of files.
``report.json``
    ``schema: 1``, every assertion with its measured value and threshold,
    and the experiment results. Timings are deliberately left out so the
    report is byte-identical across thread counts.
CSV tables and SVG plots
    Depend on the subcommand.

Exit codes: 0 all assertions pass, 2 an assertion failed, 1 usage or
configuration error.

The configuration is INI with sections ``[grid]``, ``[solver]`` and
``[experiment]``. Unknown sections or keys are rejected. Keys left out take
the documented defaults in ``DEFAULTS``, adjusted per subcommand by
``SUBCOMMAND_DEFAULTS``.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .flow import flow_grid, jacobian_determinant, measure_preservation_gap
from .grid_field import (
    Grid, ScalarField, TimePartition, VectorField, evaluate_offgrid, lp_norm, set_threads,
)
from .kernels import BACKEND
from .operators import (
    HeatKernelParams, absorbing_constant, curl, dealias, div, grad, gradient_tensor,
    heat_green, heat_kernel_point, heat_semigroup, leray_project, xi_apply,
)
from .parametrix import (
    PerturbedKernelContext, duhamel_reconstruct, hat_G_apply, remainder_R2, TERM_NAMES,
)
from .solver import (
    Forcing, random_solenoidal, save_trajectory, solve, taylor_green_2d, taylor_green_3d_init,
)
from .svgplot import loglog_svg
from .verify import (
    LP_FAMILIES, _clean, _random_field, biot_savart, energy_check, fit_slope, lp_probe,
    scaling_study, vorticity, vorticity_l1_check, vorticity_residual_check,
)

SUBCOMMANDS = ("solve", "energy-check", "remainder-scaling", "duhamel-reconstruct",
               "lp-probe", "vorticity-check", "flow-test", "op-suite")


def _int_list(text):
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


def _float_list(text):
    return [float(v) for v in str(text).replace(" ", "").split(",") if v]


# section -> key -> (parser, default)
DEFAULTS = {
    "grid": {
        "d": (int, 2),
        "N": (int, 64),
        "L": (float, 2 * math.pi),
    },
    "solver": {
        "nu": (float, 0.1),
        "T": (float, 1.0),
        "dt": (float, 1e-3),
        "init": (str, "taylor-green"),      # taylor-green | random | zero
        "seed": (int, 0),
        "band": (float, 4.0),
        "amplitude": (float, 1.0),
        "save_every": (int, 1),
        "forcing": (str, "zero"),           # zero | random
        "forcing_profile": (str, "sin"),
        "forcing_omega": (float, 1.0),
        "forcing_seed": (int, 1),
        "forcing_band": (float, 2.0),
        "forcing_amplitude": (float, 0.5),
    },
    "experiment": {
        "n_list": (_int_list, [2, 4, 8, 16, 32]),
        "n": (int, 8),
        "k": (int, -1),                     # -1 means the last slice
        "epsilon": (float, 0.5),
        "m": (int, 8),
        "m_list": (_int_list, [2, 4, 8]),
        "p_list": (_float_list, [2.0, 1.25, 4.0]),
        "samples": (int, 1000),
        "fields": (int, 100),
        "h_ode": (float, 1e-2),
        "method": (str, "spectral"),
        "sign": (int, -1),
        "s": (float, 0.5),
        "t": (float, 0.75),
    },
}

SUBCOMMAND_DEFAULTS = {
    "vorticity-check": {"grid": {"d": 3, "N": 32},
                        "solver": {"nu": 0.5, "T": 0.5, "save_every": 10}},
    "flow-test": {"solver": {"T": 0.75}},
    "op-suite": {"solver": {"T": 0.1}},
    "lp-probe": {"solver": {"seed": 7}},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt_value(v):
    if isinstance(v, list):
        return ",".join(repr(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def load_config(path, subcommand: str) -> dict:
    """Effective configuration: defaults, subcommand defaults, then the file."""
    cfg = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in DEFAULTS.items()}
    for sec, keys in SUBCOMMAND_DEFAULTS.get(subcommand, {}).items():
        cfg[sec].update(keys)
    if path is None:
        return cfg
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    for sec in parser.sections():
        if sec not in DEFAULTS:
            raise UsageError(f"unknown config section [{sec}]")
        for key, raw in parser.items(sec):
            if key not in DEFAULTS[sec]:
                raise UsageError(f"unknown config key {key!r} in [{sec}]")
            conv = DEFAULTS[sec][key][0]
            try:
                cfg[sec][key] = conv(raw)
            except ValueError:
                raise UsageError(f"bad value for {sec}.{key}: {raw!r}")
    return cfg


def write_config(cfg: dict, path: Path):
    lines = []
    for sec in DEFAULTS:
        lines.append(f"[{sec}]")
        for key in DEFAULTS[sec]:
            lines.append(f"{key} = {_fmt_value(cfg[sec][key])}")
        lines.append("")
    path.write_text("\n".join(lines))


class Checks:
    """Named assertions with measured values."""

    def __init__(self):
        self.items = []

    def add(self, name, value, op, threshold, nan_passes=False):
        value = float(value)
        if math.isnan(value):
            ok = nan_passes
        elif op == "<=":
            ok = value <= threshold
        elif op == "<":
            ok = value < threshold
        elif op == ">=":
            ok = value >= threshold
        elif op == "in":
            ok = threshold[0] <= value <= threshold[1]
        else:
            raise ValueError(op)
        self.items.append({"name": name, "value": value, "op": op,
                           "threshold": list(threshold) if op == "in" else threshold,
                           "passed": bool(ok)})
        return ok

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.items)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


# -- builders -----------------------------------------------------------------

def build_grid(cfg) -> Grid:
    g = cfg["grid"]
    try:
        return Grid(g["d"], g["N"], g["L"])
    except ValueError as exc:
        raise UsageError(str(exc))


def build_initial(cfg, grid: Grid) -> VectorField:
    s = cfg["solver"]
    init = s["init"]
    if init == "taylor-green":
        return taylor_green_2d(grid) if grid.d == 2 else taylor_green_3d_init(grid)
    if init == "random":
        return random_solenoidal(grid, s["seed"], s["band"], s["amplitude"])
    if init == "zero":
        return VectorField.zeros(grid)
    raise UsageError(f"unknown init {init!r}")


def build_forcing(cfg) -> Forcing:
    s = cfg["solver"]
    if s["forcing"] == "zero":
        return Forcing.zero()
    if s["forcing"] != "random":
        raise UsageError(f"unknown forcing {s['forcing']!r}")
    try:
        return Forcing(kind="random", profile=s["forcing_profile"], omega=s["forcing_omega"],
                       seed=s["forcing_seed"], band=s["forcing_band"],
                       amplitude=s["forcing_amplitude"])
    except ValueError as exc:
        raise UsageError(str(exc))


def build_trajectory(cfg, grid=None, forcing=None):
    grid = grid or build_grid(cfg)
    s = cfg["solver"]
    forcing = forcing if forcing is not None else build_forcing(cfg)
    u0 = build_initial(cfg, grid)
    return solve(u0, forcing, s["nu"], s["T"], s["dt"], s["save_every"]), forcing


def _steps(cfg):
    s = cfg["solver"]
    n = round(s["T"] / s["dt"])
    if s["dt"] <= 0 or abs(n * s["dt"] - s["T"]) > 1e-9 * max(1.0, s["T"]):
        raise UsageError("T must be a positive integer multiple of dt")
    if n % s["save_every"]:
        raise UsageError("save_every must divide the number of steps")


# -- subcommands --------------------------------------------------------------

def cmd_solve(cfg, out: Path, checks: Checks) -> dict:
    traj, forcing = build_trajectory(cfg)
    save_trajectory(traj, out / "trajectory", forcing, cfg["solver"]["seed"],
                    extra={"init": cfg["solver"]["init"]})
    energy = [lp_norm(u, 2) for u in traj.fields]
    _write_csv(out / "energy.csv", ["t", "u_L2"], zip(traj.times, energy))
    checks.add("divergence_residual", traj.divergence_residual(), "<=", 1e-10)
    if forcing.is_zero:
        growth = max((b - a) / max(a, 1e-300) for a, b in zip(energy, energy[1:])) \
            if len(energy) > 1 else 0.0
        checks.add("unforced_energy_monotone", growth, "<=", 1e-12)
    return {"snapshots": len(traj), "final_u_L2": energy[-1]}


def cmd_energy_check(cfg, out: Path, checks: Checks) -> dict:
    grid = build_grid(cfg)
    s = cfg["solver"]
    forcing = build_forcing(cfg)
    u0 = build_initial(cfg, grid)
    rep = energy_check(u0, forcing, s["nu"], s["T"], s["dt"], s["save_every"])
    traj = rep.trajectory
    energy = [lp_norm(u, 2) for u in traj.fields]
    _write_csv(out / "energy.csv", ["t", "u_L2"], zip(traj.times, energy))
    checks.add("energy_slack", rep.slack, ">=", -1e-6 * rep.rhs)
    result = {"energy": rep.as_dict()}
    if forcing.is_zero and len(energy) > 1:
        growth = max((b - a) / max(a, 1e-300) for a, b in zip(energy, energy[1:]))
        checks.add("unforced_energy_monotone", growth, "<=", 1e-12)
    if forcing.is_zero and s["init"] == "taylor-green" and grid.d == 2:
        exact = taylor_green_2d(grid, s["T"], s["nu"])
        err = lp_norm(traj.fields[-1] - exact, 2) / lp_norm(exact, 2)
        checks.add("taylor_green_relative_error", err, "<=", 1e-6)
        result["taylor_green_relative_error"] = err
    return result


def cmd_remainder_scaling(cfg, out: Path, checks: Checks) -> dict:
    e = cfg["experiment"]
    traj, _ = build_trajectory(cfg)
    ctx = PerturbedKernelContext(traj, h_ode=e["h_ode"], sign=e["sign"], method=e["method"])
    T = cfg["solver"]["T"]
    try:
        res = scaling_study(ctx, T, e["n_list"], e["epsilon"], e["m"])
    except ValueError as exc:
        raise UsageError(str(exc))
    _write_csv(out / "remainders.csv", list(res.rows[0].CSV_COLUMNS) if res.rows else [],
               [r.row() for r in res.rows])
    # R2 without the first-order subtraction, for the record
    r2_plain = []
    for n in res.n_list:
        part = TimePartition(T, n)
        r2_plain.append(max(remainder_R2(ctx, part, k, part.slice(k)[1], e["m"], e["epsilon"],
                                         first_order=False) for k in range(n)))
    slope_r2_plain = fit_slope(res.n_list, r2_plain)[0]
    targets = {"R1": -1.5, "R2": -(1 + e["epsilon"] / 2), "R3": -(1 + e["epsilon"] / 2)}
    _write_csv(out / "slopes.csv", ["name", "slope", "total_slope", "target"],
               [[k, res.slopes[k], res.total_slopes[k], targets[k]] for k in ("R1", "R2", "R3")]
               + [["R2_no_first_order", slope_r2_plain, float("nan"), targets["R2"]]])
    notes = [f"slope {k}: {res.slopes[k]:.3f}" for k in ("R1", "R2", "R3")]
    (out / "remainder_scaling.svg").write_text(loglog_svg(
        {k: (res.n_list, res.max_R[k]) for k in ("R1", "R2", "R3")},
        "max over slices of the remainders", "n", "max_k R_i", notes))
    checks.add("R1_slope", res.slopes["R1"], "in", (-1.75, -1.25), nan_passes=True)
    checks.add("R2_slope", res.slopes["R2"], "<=", -1.0, nan_passes=True)
    checks.add("R3_slope", res.slopes["R3"], "<=", -1.0, nan_passes=True)
    out_d = res.as_dict()
    out_d["R2_no_first_order"] = {"max_R": r2_plain, "slope": slope_r2_plain}
    out_d["targets"] = targets
    return _clean(out_d)


def cmd_duhamel(cfg, out: Path, checks: Checks) -> dict:
    e = cfg["experiment"]
    traj, forcing = build_trajectory(cfg)
    T = cfg["solver"]["T"]
    part = TimePartition(T, e["n"])
    k = e["k"] if e["k"] >= 0 else e["n"] - 1
    if not 0 <= k < e["n"]:
        raise UsageError(f"slice {k} out of range for n={e['n']}")
    t = part.slice(k)[1]
    ctx = PerturbedKernelContext(traj, h_ode=e["h_ode"], sign=e["sign"], method=e["method"])
    ref = traj.at(t)
    errors, rows = [], []
    pythag = 0.0
    for m in e["m_list"]:
        res = duhamel_reconstruct(ctx, part, k, t, m, forcing)
        err = res.error(ref)
        errors.append(err)
        rows.append([m, err] + [res.projected_norms[n] for n in TERM_NAMES]
                    + [res.raw_norms[n] for n in TERM_NAMES])
        pythag = max(pythag, max(res.projected_norms[n] - res.raw_norms[n] for n in TERM_NAMES))
    _write_csv(out / "reconstruction.csv",
               ["m", "relative_error"] + [f"P_{n}" for n in TERM_NAMES]
               + [f"raw_{n}" for n in TERM_NAMES], rows)
    ratios = [a / b for (ma, a), (mb, b) in zip(zip(e["m_list"], errors),
                                                 zip(e["m_list"][1:], errors[1:]))
              if mb == 2 * ma and b > 0]
    (out / "reconstruction.svg").write_text(loglog_svg(
        {"relative error": (e["m_list"], errors)}, f"Duhamel reconstruction, n={e['n']}, k={k}",
        "m", "relative L2 error",
        [f"slope {fit_slope(e['m_list'], errors)[0]:.3f}"] if len(errors) > 1 else []))
    checks.add("relative_error", errors[-1], "<=", 5e-2)
    if ratios:
        checks.add("min_error_ratio_on_doubling", min(ratios), ">=", 1.8)
    checks.add("projection_never_increases_norm", pythag, "<=", 1e-12)
    return {"n": e["n"], "k": k, "t": t, "m_list": e["m_list"], "errors": errors,
            "ratios": ratios}


def cmd_lp_probe(cfg, out: Path, checks: Checks) -> dict:
    e = cfg["experiment"]
    grid = build_grid(cfg)
    seed = cfg["solver"]["seed"]
    results, rows = {}, []
    sol = random_solenoidal(grid, seed, min(4, grid.N // 3 - 1), 1.0)
    for p in e["p_list"]:
        if not p >= 1:
            raise UsageError("p must be >= 1")
        r = lp_probe(grid, p, e["samples"], seed, LP_FAMILIES)
        results[repr(p)] = r.as_dict()
        rows.append([p, r.max_ratio, r.argmax.get("family"), r.argmax.get("index")]
                    + [r.family_max[f] for f in LP_FAMILIES])
        fixed = abs(lp_norm(leray_project(sol), p) / lp_norm(sol, p) - 1)
        checks.add(f"solenoidal_ratio_is_one_p{p!r}", fixed, "<=", 1e-10)
        if p == 2:
            checks.add("p2_max_ratio", r.max_ratio, "<=", 1 + 1e-12)
    _write_csv(out / "lp_probe.csv",
               ["p", "max_ratio", "argmax_family", "argmax_index"]
               + [f"max_{f}" for f in LP_FAMILIES], rows)
    return {"probes": results}


def cmd_vorticity(cfg, out: Path, checks: Checks) -> dict:
    grid = build_grid(cfg)
    if grid.d != 3:
        raise UsageError("vorticity-check needs d = 3")
    s = cfg["solver"]
    forcing = build_forcing(cfg)
    u0 = build_initial(cfg, grid)
    traj = solve(u0, forcing, s["nu"], s["T"], s["dt"], s["save_every"])
    rep = vorticity_l1_check(u0, forcing, s["nu"], s["T"], s["dt"], s["save_every"], traj=traj)
    _write_csv(out / "vorticity.csv", ["t", "omega_L1", "grad_u_L2_sq", "grad_omega_L1"],
               rep.series)
    resid = vorticity_residual_check(traj, forcing) if len(traj) >= 3 else None
    roundtrip = 0.0
    for u in (traj.fields[0], traj.fields[-1]):
        scale = lp_norm(u, 2)
        if scale > 0:
            back = biot_savart(vorticity(u))
            roundtrip = max(roundtrip, lp_norm(back - (u - VectorField.constant(grid, u.mean())), 2)
                            / scale)
    w0 = lp_norm(vorticity(u0), 1)
    homog = abs(lp_norm(vorticity(u0 * 0.5), 1) - 0.5 * w0) / w0 if w0 > 0 else 0.0
    checks.add("explicit_bound_slack", rep.slack, ">=", -1e-6 * rep.bound)
    checks.add("biot_savart_roundtrip", roundtrip, "<=", 1e-10)
    checks.add("enstrophy_identity", rep.enstrophy_identity_gap, "<=", 1e-10)
    checks.add("homogeneity", homog, "<=", 1e-12)
    if resid is not None:
        checks.add("vorticity_residual_relative", resid["relative"], "<", 1e-3)
    return {"vorticity": rep.as_dict(), "residual": _clean(resid), "biot_savart": roundtrip}


def _smooth_scalar(grid):
    x = grid.coords()
    return ScalarField(grid, np.exp(sum(np.cos((i + 1) * xi + 0.3 * i) for i, xi in enumerate(x))))


def cmd_flow_test(cfg, out: Path, checks: Checks) -> dict:
    e = cfg["experiment"]
    traj, _ = build_trajectory(cfg)
    grid = traj.grid
    s, t, h = e["s"], e["t"], e["h_ode"]
    try:
        fm = flow_grid(traj, s, t, h, e["sign"])
        fm2 = flow_grid(traj, s, t, h / 2, e["sign"])
    except ValueError as exc:
        raise UsageError(str(exc))
    phi = _smooth_scalar(grid)
    _, _, gap = measure_preservation_gap(fm, phi)
    det = jacobian_determinant(fm)
    det_err = float(np.max(np.abs(det - 1)))
    halving = float(np.max(np.abs(fm.displacement - fm2.displacement)))
    # cancellation: first moment of the kernel around its centre
    ctx = PerturbedKernelContext(traj, h_ode=h, sign=e["sign"], method="stencil")
    _, mom = ctx.average([phi], fm.flat_points(), t - s)
    first_moment = float(np.max(np.abs(mom)))
    q = 2 - e["epsilon"]
    composed = ScalarField(grid, evaluate_offgrid(phi, fm.flat_points()).reshape(grid.shape))
    qgap = abs(lp_norm(composed, q) - lp_norm(phi, q)) / lp_norm(phi, q)
    metrics = {"measure_preservation_gap": gap, "jacobian_max_deviation": det_err,
               "step_halving_max_displacement_diff": halving, "kernel_first_moment": first_moment,
               "L2-eps_norm_gap": qgap, "max_displacement": float(np.max(np.abs(fm.displacement)))}
    _write_csv(out / "flow_metrics.csv", ["name", "value"], sorted(metrics.items()))
    checks.add("measure_preservation_gap", gap, "<", 1e-6)
    checks.add("jacobian_max_deviation", det_err, "<=", 1e-3)
    checks.add("step_halving_max_displacement_diff", halving, "<", 1e-8)
    checks.add("kernel_first_moment", first_moment, "<", 1e-8)
    checks.add("L2-eps_norm_gap", qgap, "<=", 1e-5)
    return {"s": s, "t": t, "metrics": metrics}


def cmd_op_suite(cfg, out: Path, checks: Checks) -> dict:
    e = cfg["experiment"]
    grid = build_grid(cfg)
    seed = cfg["solver"]["seed"]
    rng = np.random.default_rng(seed)
    band = max(1, grid.N // 4)
    idem = pyth = divr = curlxi = 0.0
    for _ in range(e["fields"]):
        phi = _random_field(grid, rng, band)
        n = lp_norm(phi, 2)
        P = leray_project(phi)
        X = xi_apply(phi)
        idem = max(idem, lp_norm(leray_project(P) - P, 2) / n)
        pyth = max(pyth, abs(lp_norm(P, 2) ** 2 + lp_norm(X, 2) ** 2 - n ** 2) / n ** 2)
        gphi = lp_norm(VectorField(grid, gradient_tensor(phi).reshape((-1,) + grid.shape)), 2)
        divr = max(divr, lp_norm(div(P), 2) / gphi)
        curlxi = max(curlxi, lp_norm(curl(X), 2) / gphi)
    checks.add("leray_idempotence", idem, "<=", 1e-12)
    checks.add("pythagorean_identity", pyth, "<=", 1e-10)
    checks.add("leray_divergence", divr, "<=", 1e-10)
    checks.add("xi_is_curl_free", curlxi, "<=", 1e-10)

    nu = cfg["solver"]["nu"]
    phi = _random_field(grid, rng, band)
    law = 0.0
    for a, b in ((0.01, 0.02), (0.1, 0.3), (0.5, 0.5)):
        lhs = heat_semigroup(heat_semigroup(phi, nu, a), nu, b)
        law = max(law, lp_norm(lhs - heat_semigroup(phi, nu, a + b), 2) / lp_norm(phi, 2))
    checks.add("semigroup_law", law, "<=", 1e-12)

    params = HeatKernelParams(nu, grid.d)
    mass = 0.0
    shift = rng.uniform(0, grid.L, grid.d)
    for t in (0.1, 1.0, 10.0):
        if nu * t * grid.N ** 2 < 40:
            continue
        k = heat_kernel_point(params, t, grid.points() - shift, grid.L)
        mass = max(mass, abs(grid.cell_volume * float(np.sum(k)) - 1))
    checks.add("kernel_mass", mass, "<=", 1e-10)

    traj, _ = build_trajectory(cfg, grid, Forcing.zero())
    ctx = PerturbedKernelContext(traj, h_ode=e["h_ode"], sign=e["sign"], method=e["method"])
    r, t = 0.0, traj.horizon
    ones = ScalarField(grid, np.ones(grid.shape))
    g1 = float(np.max(np.abs(hat_G_apply(ctx, ones, r, t).values - (t - r))))
    h1 = float(np.max(np.abs(heat_green(ones, nu, r, t).values - (t - r))))
    checks.add("hat_G_one", g1, "<=", 1e-12)
    checks.add("heat_green_one", h1, "<=", 1e-12)

    cg = 0.0
    g = _random_field(grid, rng, band).component(0)
    gn = lp_norm(grad(g), 2)
    if gn > 0:
        cg = lp_norm(curl(grad(g)), 2) / gn
    checks.add("curl_of_gradient", cg, "<=", 1e-12)

    high = float(np.max(np.abs(dealias(phi).spectral * ~grid.dealias_mask())))
    checks.add("dealias_removes_high_modes", high, "<=", 0.0)

    radii = np.linspace(0, 10, 2001)
    absorb = 0.0
    for delta in (0.5, 1.0, 2.0, 4.0):
        C = absorbing_constant(delta)
        absorb = max(absorb, float(np.max(radii ** delta * np.exp(-radii ** 2)
                                          - C * np.exp(-radii ** 2 / C))))
    checks.add("absorbing_inequality", absorb, "<=", 0.0)
    _write_csv(out / "op_suite.csv", ["name", "value", "op", "threshold", "passed"],
               [[c["name"], c["value"], c["op"], c["threshold"], c["passed"]]
                for c in checks.items])
    return {"fields": e["fields"], "grid": {"d": grid.d, "N": grid.N}}


COMMANDS = {
    "solve": cmd_solve,
    "energy-check": cmd_energy_check,
    "remainder-scaling": cmd_remainder_scaling,
    "duhamel-reconstruct": cmd_duhamel,
    "lp-probe": cmd_lp_probe,
    "vorticity-check": cmd_vorticity,
    "flow-test": cmd_flow_test,
    "op-suite": cmd_op_suite,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nsparametrix", description="Parametrix verification experiments.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="INI file with [grid], [solver], [experiment]")
    p.add_argument("--out", help="run directory (default runs/<subcommand>)")
    p.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    p.add_argument("--seed-override", type=int, help="replace solver.seed")
    p.add_argument("--epsilon", type=float, help="replace experiment.epsilon")
    p.add_argument("--n-list", help="replace experiment.n_list, e.g. 2,4,8")
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        cfg = load_config(args.config, args.subcommand)
        if args.seed_override is not None:
            cfg["solver"]["seed"] = args.seed_override
        if args.epsilon is not None:
            cfg["experiment"]["epsilon"] = args.epsilon
        if args.n_list is not None:
            try:
                cfg["experiment"]["n_list"] = _int_list(args.n_list)
            except ValueError:
                raise UsageError(f"bad --n-list {args.n_list!r}")
        if not 0 < cfg["experiment"]["epsilon"] < 1:
            raise UsageError("epsilon must lie in (0, 1)")
        _steps(cfg)
        set_threads(args.threads)
        out = Path(args.out or Path("runs") / args.subcommand)
        out.mkdir(parents=True, exist_ok=True)
        write_config(cfg, out / "config.ini")
        checks = Checks()
        results = COMMANDS[args.subcommand](cfg, out, checks)
    except UsageError as exc:
        print(f"nsparametrix: error: {exc}", file=sys.stderr)
        return 1
    report = {"schema": 1, "subcommand": args.subcommand, "passed": checks.passed,
              "assertions": _clean(checks.items), "results": _clean(results)}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    files = sorted(str(p.relative_to(out)) for p in out.rglob("*") if p.is_file())
    manifest = {"schema": 1, "subcommand": args.subcommand, "version": __version__,
                "backend": BACKEND, "files": sorted(set(files) | {"manifest.json"})}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for c in checks.items:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']} = {c['value']:.6g}")
    return 0 if checks.passed else 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
