import math

import numpy as np
import pytest

from nsparametrix import ScalarField, Trajectory, VectorField
from nsparametrix.flow import (
    flow_grid, flow_point, flow_sweep, jacobian_determinant, measure_preservation_gap,
    write_flowmap,
)
from nsparametrix.grid_field import read_snapshot

from conftest import uniform_trajectory


def bumpy(grid):
    return ScalarField.from_function(grid, lambda x, y: np.exp(np.cos(x) + 0.5 * np.sin(2 * y)))


def test_zero_velocity_is_identity(zero_traj):
    x = np.array([1.0, 2.0])
    assert np.array_equal(flow_point(zero_traj, 0.1, 0.4, x), x)
    fm = flow_grid(zero_traj, 0.0, 0.5)
    assert np.array_equal(fm.flat_points(), zero_traj.grid.points())
    gap = measure_preservation_gap(fm, bumpy(zero_traj.grid))[2]
    assert gap == 0.0


def test_identity_at_equal_times(tg_short):
    fm = flow_grid(tg_short, 0.3, 0.3)
    assert np.array_equal(fm.flat_points(), tg_short.grid.points())
    assert np.all(fm.displacement == 0)


def test_constant_drift(grid32):
    c = np.array([0.7, -1.3])
    tr = uniform_trajectory(grid32, lambda t: c)
    x = np.array([6.0, 0.2])
    s, tau = 0.2, 0.9
    expect = np.mod(x + (tau - s) * c, grid32.L)
    assert np.allclose(flow_point(tr, s, tau, x), expect, atol=1e-13)
    # physical foot runs the other way
    back = np.mod(x - (tau - s) * c, grid32.L)
    assert np.allclose(flow_point(tr, s, tau, x, sign=-1), back, atol=1e-13)
    fm = flow_grid(tr, s, tau)
    assert np.all((fm.points >= 0) & (fm.points < grid32.L))
    assert np.allclose(jacobian_determinant(fm), 1.0, atol=1e-12)
    assert measure_preservation_gap(fm, bumpy(grid32))[2] <= 1e-10


def test_time_dependent_uniform_velocity(grid32):
    tr = uniform_trajectory(grid32, lambda t: [math.cos(t), 0.0], T=1.0, count=1001)
    x = np.array([1.0, 1.0])
    s, tau = 0.1, 0.8
    out = flow_point(tr, s, tau, x, h_ode=1e-2)
    # linear-in-time interpolation costs O(dt^2)
    assert out[0] == pytest.approx(1.0 + math.sin(tau) - math.sin(s), abs=1e-7)
    assert out[1] == pytest.approx(1.0, abs=1e-14)


def test_rk4_order(grid32):
    # exact time interpolation: velocity linear in t is reproduced exactly
    tr = uniform_trajectory(grid32, lambda t: [t, 0.0], T=1.0, count=3)
    x = np.array([0.5, 0.5])
    out = flow_point(tr, 0.0, 1.0, x, h_ode=0.5)
    assert out[0] == pytest.approx(1.0, abs=1e-14)


def test_flow_composition(tg_traj):
    x = tg_traj.grid.points()[::97]
    s, r, tau = 0.2, 0.35, 0.5
    h = 1e-2
    mid = flow_sweep(tg_traj, tau, [r], x, h)[0]
    two = flow_sweep(tg_traj, r, [s], mid, h)[0]
    one = flow_sweep(tg_traj, tau, [s], x, h)[0]
    assert np.max(np.abs(two - one)) < 1e-9


def test_sweep_matches_separate_calls(tg_short):
    x = tg_short.grid.points()[:50]
    sweep = flow_sweep(tg_short, 0.4, [0.1, 0.3, 0.2], x, 1e-2)
    for i, s in enumerate([0.1, 0.3, 0.2]):
        single = flow_sweep(tg_short, 0.4, [s], x, 1e-2)[0]
        assert np.max(np.abs(sweep[i] - single)) < 1e-12


def test_step_halving_oracle(tg_traj):
    fm = flow_grid(tg_traj, 0.5, 0.75, 1e-2)
    fm2 = flow_grid(tg_traj, 0.5, 0.75, 5e-3)
    assert np.max(np.abs(fm.displacement - fm2.displacement)) < 1e-8


def test_taylor_green_measure_preservation(tg_traj):
    for sign in (1, -1):
        fm = flow_grid(tg_traj, 0.5, 0.75, 1e-2, sign)
        assert measure_preservation_gap(fm, bumpy(tg_traj.grid))[2] < 1e-6
        assert np.max(np.abs(jacobian_determinant(fm) - 1)) < 1e-3


def test_errors(tg_short):
    x = np.zeros(2)
    with pytest.raises(ValueError):
        flow_point(tg_short, 0.4, 0.2, x)
    with pytest.raises(ValueError):
        flow_point(tg_short, 0.0, 0.6, x)
    with pytest.raises(ValueError):
        flow_point(tg_short, -0.1, 0.2, x)
    with pytest.raises(ValueError):
        flow_point(tg_short, 0.0, 0.2, x, h_ode=0.0)


def test_flowmap_export(tmp_path, grid32):
    tr = uniform_trajectory(grid32, lambda t: [0.5, 0.25])
    fm = flow_grid(tr, 0.0, 1.0)
    write_flowmap(tmp_path / "fm.bin", fm)
    f, t = read_snapshot(tmp_path / "fm.bin")
    assert t == 1.0 and np.allclose(f.values[0], 0.5) and np.allclose(f.values[1], 0.25)
