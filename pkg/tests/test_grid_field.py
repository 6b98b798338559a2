import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nsparametrix import Grid, ScalarField, VectorField, evaluate_offgrid, lp_norm
from nsparametrix.grid_field import (
    TimePartition, Trajectory, inner, oversample, parseval_norm2, read_snapshot,
    spectral_forward, spectral_inverse, write_field_csv, write_snapshot,
)

from conftest import random_vfield


def test_grid_invariants():
    g = Grid(3, 16)
    assert g.h * g.N == pytest.approx(g.L)
    assert g.size == 16 ** 3
    assert g.points().shape == (g.size, 3)
    for bad in [(1, 16), (2, 12), (2, 4), (4, 16)]:
        with pytest.raises(ValueError):
            Grid(*bad)
    with pytest.raises(ValueError):
        Grid(2, 16, -1.0)


def test_constant_field_has_only_zero_mode(grid32):
    c = 2.5
    f = ScalarField(grid32, np.full(grid32.shape, c))
    coef = spectral_forward(f)
    assert coef[0, 0] == pytest.approx(c * grid32.size)
    rest = coef.copy()
    rest[0, 0] = 0
    assert np.max(np.abs(rest)) < 1e-10


def test_sine_has_two_conjugate_modes(grid32):
    f = ScalarField.from_function(grid32, lambda x, y: np.sin(x))
    coef = spectral_forward(f)
    big = np.argwhere(np.abs(coef) > 1e-9)
    # rfft layout keeps k=+1 at row 1 and k=-1 at row N-1
    assert sorted(map(tuple, big)) == [(1, 0), (grid32.N - 1, 0)]
    assert coef[1, 0] == pytest.approx(np.conj(coef[-1, 0]))


@pytest.mark.parametrize("d,N", [(2, 32), (3, 16)])
def test_round_trip(d, N):
    g = Grid(d, N)
    f = random_vfield(g, 3)
    back = spectral_inverse(spectral_forward(f), g)
    assert np.max(np.abs(back.values - f.values)) < 1e-12 * np.max(np.abs(f.values))


def test_spectral_inverse_size_mismatch(grid32):
    with pytest.raises(ValueError):
        spectral_inverse(np.zeros((5, 5), complex), grid32)


def test_lp_norm_examples():
    g = Grid(2, 64)
    c = -3.0
    assert lp_norm(ScalarField(g, np.full(g.shape, c)), 2) == pytest.approx(abs(c) * 2 * math.pi, rel=1e-14)
    s = ScalarField.from_function(g, lambda x, y: np.sin(x))
    assert lp_norm(s, 2) == pytest.approx(math.pi * math.sqrt(2), rel=1e-14)
    assert abs(lp_norm(s, np.inf) - 1) < 1e-3
    with pytest.raises(ValueError):
        lp_norm(s, 0.5)


def test_linf_is_oversampled():
    # a peak between nodes is found by the 2x oversampled grid
    g = Grid(2, 8)
    shift = g.h / 2
    f = ScalarField.from_function(g, lambda x, y: np.cos(x - shift) * np.cos(y - shift))
    assert np.max(np.abs(f.values)) < 0.97
    assert lp_norm(f, np.inf) == pytest.approx(1.0, abs=1e-12)


@given(c=st.floats(-1e3, 1e3), p=st.sampled_from([1.0, 1.5, 2.0, 3.0, np.inf]),
       seed=st.integers(0, 10 ** 6))
def test_lp_norm_homogeneous(c, p, seed):
    g = Grid(2, 16)
    f = random_vfield(g, seed)
    assert lp_norm(f * c, p) == pytest.approx(abs(c) * lp_norm(f, p), rel=1e-12, abs=1e-300)


@given(seed=st.integers(0, 10 ** 6))
def test_parseval(seed):
    g = Grid(2, 16)
    f = random_vfield(g, seed)
    assert parseval_norm2(f) == pytest.approx(lp_norm(f, 2) ** 2, rel=1e-10)
    assert inner(f, f) == pytest.approx(lp_norm(f, 2) ** 2, rel=1e-12)


def test_offgrid_examples(grid64):
    s = ScalarField.from_function(grid64, lambda x, y: np.sin(x))
    assert evaluate_offgrid(s, [math.pi / 3, 1.234]) == pytest.approx(math.sin(math.pi / 3), abs=1e-12)
    f = random_vfield(grid64, 5)
    nodes = grid64.points()[::37]
    vals = evaluate_offgrid(f, nodes)
    expect = f.values.reshape(2, -1).T[::37]
    assert np.max(np.abs(vals - expect)) < 1e-12


def test_offgrid_vs_refined_grid():
    g = Grid(2, 32)
    f = random_vfield(g, 8, band=6)
    fine = oversample(f, 4)
    rng = np.random.default_rng(0)
    idx = rng.integers(0, fine.grid.N, (100, 2))
    pts = idx * fine.grid.h
    expect = fine.values[:, idx[:, 0], idx[:, 1]].T
    assert np.max(np.abs(evaluate_offgrid(f, pts) - expect)) < 1e-10


def test_offgrid_wraps(grid32):
    f = random_vfield(grid32, 2)
    p = np.array([0.3, 1.1])
    a = evaluate_offgrid(f, p)
    b = evaluate_offgrid(f, p + np.array([2 * math.pi, -4 * math.pi]))
    assert np.allclose(a, b, atol=1e-12)


def test_offgrid_3d():
    g = Grid(3, 16)
    f = VectorField.from_function(g, lambda x, y, z: (np.sin(x) * np.cos(z), np.cos(y), np.sin(2 * z)))
    p = np.array([[0.4, 1.3, 2.2]])
    x, y, z = p[0]
    expect = [math.sin(x) * math.cos(z), math.cos(y), math.sin(2 * z)]
    assert np.allclose(evaluate_offgrid(f, p)[0], expect, atol=1e-12)


def test_time_partition():
    part = TimePartition(1.0, 3)
    assert part.knot(0) == 0.0 and part.knot(3) == 1.0
    assert part.knot(1) == 1.0 / 3
    assert part.slice(2) == (2.0 / 3, 1.0)
    with pytest.raises(ValueError):
        TimePartition(1.0, 0)


def test_trajectory_interpolation(grid32):
    a = VectorField.constant(grid32, [1.0, 0.0])
    b = VectorField.constant(grid32, [3.0, 2.0])
    tr = Trajectory([a, b], 0.0, 0.5, 0.1)
    assert np.allclose(tr.at(0.25).values[:, 0, 0], [2.0, 1.0])
    assert np.allclose(tr.velocity_at_points(0.125, np.array([[1.0, 2.0]])), [[1.5, 0.5]])
    with pytest.raises(ValueError):
        tr.at(0.6)


def test_snapshot_round_trip(tmp_path, grid32):
    f = random_vfield(grid32, 4)
    write_snapshot(tmp_path / "u.bin", f, 0.75)
    g, t = read_snapshot(tmp_path / "u.bin")
    assert t == 0.75 and np.array_equal(g.values, f.values)
    raw = (tmp_path / "u.bin").read_bytes()
    assert raw[:4] == b"NSPF"
    # samples are little-endian float64 straight after the header
    assert np.frombuffer(raw[-8:], "<f8")[0] == f.values.ravel()[-1]
    s = f.component(0)
    write_snapshot(tmp_path / "s.bin", s)
    assert isinstance(read_snapshot(tmp_path / "s.bin")[0], ScalarField)
    write_field_csv(tmp_path / "s.csv", s)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,c0" and len(lines) == grid32.size + 1


def test_fields_are_immutable(grid32):
    f = random_vfield(grid32, 1)
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        ScalarField(grid32, np.full(grid32.shape, np.nan))
