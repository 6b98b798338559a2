import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nsparametrix import Grid, ScalarField, _fallback, kernels
from nsparametrix.grid_field import evaluate_offgrid

try:
    from nsparametrix import _kernels
except ImportError:
    _kernels = None

BACKENDS = [_fallback] + ([_kernels] if _kernels is not None else [])
needs_compiled = pytest.mark.skipif(_kernels is None, reason="extension not built")


@pytest.mark.parametrize("impl", BACKENDS)
def test_trig_eval_single_mode(impl):
    k0 = np.array([0.0, 1.0, 2.0, -1.0])
    k1 = np.array([0.0, 1.0, 2.0])
    coef = np.zeros((1, 4, 3), complex)
    coef[0, 2, 1] = 0.5 - 0.25j
    pts = np.array([[0.3, 1.1], [2.0, -0.7], [6.0, 6.0]])
    expect = np.real((0.5 - 0.25j) * np.exp(1j * (2 * pts[:, 0] + pts[:, 1])))
    assert np.allclose(impl.trig_eval_2d(coef, k0, k1, pts)[:, 0], expect, atol=1e-15)


@pytest.mark.parametrize("impl", BACKENDS)
def test_gaussian_average_of_constant(impl):
    g = Grid(2, 32)
    vals = np.full((1,) + g.shape, 2.5)
    centers = np.array([[0.1, 0.2], [3.3, 6.2]])
    sigma = 0.2
    avg, mom, mass = impl.gaussian_average_2d(vals, centers, sigma, g.h, 6 * sigma)
    assert np.allclose(avg, 2.5, atol=1e-14)
    # the normalised first moment of a sampled Gaussian is tiny once sigma >> h
    assert np.max(np.abs(mom)) < 1e-8 and np.all(mass > 0)


@needs_compiled
@given(seed=st.integers(0, 10 ** 6))
def test_trig_eval_parity(seed):
    rng = np.random.default_rng(seed)
    for d, N in ((2, 16), (3, 8)):
        g = Grid(d, N)
        f = ScalarField(g, rng.standard_normal(g.shape))
        pts = rng.uniform(-1, 7, (37, d))
        a = evaluate_offgrid(f, pts)
        kernels_backup = kernels.trig_eval_2d, kernels.trig_eval_3d
        try:
            kernels.trig_eval_2d, kernels.trig_eval_3d = _fallback.trig_eval_2d, _fallback.trig_eval_3d
            b = evaluate_offgrid(f, pts)
        finally:
            kernels.trig_eval_2d, kernels.trig_eval_3d = kernels_backup
        assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(f.values))


@needs_compiled
@pytest.mark.parametrize("d,N", [(2, 32), (3, 16)])
def test_gaussian_average_parity(d, N):
    rng = np.random.default_rng(d)
    g = Grid(d, N)
    vals = rng.standard_normal((d,) + g.shape)
    centers = rng.uniform(0, g.L, (50, d))
    sigma = 1.5 * g.h
    name = f"gaussian_average_{d}d"
    out_c = getattr(_kernels, name)(vals, centers, sigma, g.h, 6 * sigma)
    out_p = getattr(_fallback, name)(vals, centers, sigma, g.h, 6 * sigma)
    for a, b in zip(out_c, out_p):
        assert np.max(np.abs(np.asarray(a) - b)) <= 1e-12 * max(1.0, np.max(np.abs(b)))


def test_evaluate_offgrid_reproduces_grid_values():
    g = Grid(2, 16)
    f = ScalarField.from_function(g, lambda x, y: np.sin(x + 0.3) * np.cos(2 * y))
    assert np.allclose(evaluate_offgrid(f, g.points()), f.values.ravel(), atol=1e-13)
    pts = np.array([[0.123, 4.56]])
    assert evaluate_offgrid(f, pts)[0] == pytest.approx(np.sin(0.423) * np.cos(9.12), abs=1e-13)


def test_pure_env_selects_fallback():
    env = dict(os.environ, NSPARAMETRIX_PURE="1")
    code = "from nsparametrix.kernels import BACKEND; print(BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
    env["NSPARAMETRIX_PURE"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == ("compiled" if _kernels is not None else "python")
