import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nsparametrix import Grid, ScalarField, VectorField, lp_norm
from nsparametrix.grid_field import inner
from nsparametrix.operators import (
    HeatKernelParams, absorbing_constant, advection, curl, div, grad, gradient_tensor,
    heat_green, heat_kernel_point, heat_semigroup, hessian_tensor, image_cutoff, laplacian,
    leray_project, transport, xi_apply,
)
from nsparametrix.solver import taylor_green_2d

from conftest import random_vfield


def test_heat_kernel_free_space_limit():
    p = HeatKernelParams(1.0, 2)
    for nut in (1e-3, 1e-2):
        v = heat_kernel_point(p, nut, np.zeros(2))
        assert v == pytest.approx(1 / (4 * math.pi * nut), rel=1e-12)


@pytest.mark.parametrize("d,N", [(2, 64), (3, 32)])
def test_heat_kernel_mass(d, N):
    g = Grid(d, N)
    p = HeatKernelParams(0.5, d)
    shift = np.full(d, 0.37)
    for t in (0.05, 1.0, 20.0):
        k = heat_kernel_point(p, t, g.points() - shift)
        assert abs(g.cell_volume * np.sum(k) - 1) < 1e-10


@given(x=st.lists(st.floats(-10, 10), min_size=2, max_size=2), t=st.floats(1e-3, 5))
def test_heat_kernel_even(x, t):
    p = HeatKernelParams(0.3, 2)
    x = np.array(x)
    assert heat_kernel_point(p, t, x) == heat_kernel_point(p, t, -x)


def test_heat_kernel_errors():
    with pytest.raises(ValueError):
        HeatKernelParams(0.0, 2)
    with pytest.raises(ValueError):
        heat_kernel_point(HeatKernelParams(1.0, 2), 0.0, np.zeros(2))
    assert image_cutoff(1e-3, 2 * math.pi) == 1
    assert image_cutoff(10.0, 2 * math.pi) > 1


def test_heat_semigroup_examples(grid32):
    s = ScalarField.from_function(grid32, lambda x, y: np.sin(x))
    assert heat_semigroup(s, 1.0, 0.0) is s
    out = heat_semigroup(s, 1.0, 1.0)
    assert np.max(np.abs(out.values - math.exp(-1) * s.values)) < 1e-14
    with pytest.raises(ValueError):
        heat_semigroup(s, 1.0, -1e-3)


@given(a=st.floats(0, 2), b=st.floats(0, 2), seed=st.integers(0, 1000))
def test_semigroup_law(a, b, seed):
    g = Grid(2, 16)
    f = random_vfield(g, seed)
    lhs = heat_semigroup(heat_semigroup(f, 0.4, a), 0.4, b)
    rhs = heat_semigroup(f, 0.4, a + b)
    assert lp_norm(lhs - rhs, 2) <= 1e-12 * lp_norm(f, 2)


@pytest.mark.parametrize("p", [1, 2, np.inf])
def test_semigroup_contracts(p, grid32):
    f = random_vfield(grid32, 11)
    assert lp_norm(heat_semigroup(f, 0.2, 0.3), p) <= lp_norm(f, p) * (1 + 1e-12)


def test_heat_green_examples(grid32):
    one = ScalarField(grid32, np.full(grid32.shape, 3.0))
    assert np.max(np.abs(heat_green(one, 0.7, 0.2, 1.1).values - 3.0 * 0.9)) < 1e-12
    s = ScalarField.from_function(grid32, lambda x, y: np.sin(x))
    r, t, m = 0.0, 1.0, 64
    out = heat_green(s, 1.0, r, t, m)
    # midpoint rule error (t-r)^3/(24 m^2) * max|f''|
    assert np.max(np.abs(out.values - s.values * (1 - math.exp(-(t - r))))) < 1e-4
    assert np.max(np.abs(heat_green(s, 1.0, 0.5, 0.5).values)) == 0
    with pytest.raises(ValueError):
        heat_green(s, 1.0, 1.0, 0.5)


def test_heat_green_converges_second_order(grid32):
    s = ScalarField.from_function(grid32, lambda x, y: np.sin(x))
    exact = s.values * (1 - math.exp(-1))
    errs = [np.max(np.abs(heat_green(s, 1.0, 0.0, 1.0, m).values - exact)) for m in (8, 16, 32)]
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)


def test_leray_examples(grid32):
    g = ScalarField.from_function(grid32, lambda x, y: np.sin(x) * np.sin(y))
    assert np.max(np.abs(leray_project(grad(g)).values)) < 1e-12
    psi = ScalarField.from_function(grid32, lambda x, y: np.cos(2 * x + y) + np.sin(y))
    gp = grad(psi).values
    sol = VectorField(grid32, np.stack([-gp[1], gp[0]]))
    assert np.max(np.abs(leray_project(sol).values - sol.values)) < 1e-12


def test_leray_keeps_mean(grid32):
    c = VectorField.constant(grid32, [1.5, -2.0])
    assert np.allclose(leray_project(c).values, c.values)
    assert np.max(np.abs(xi_apply(c).values)) < 1e-15


@given(seed=st.integers(0, 10 ** 6), d=st.sampled_from([2, 3]))
def test_leray_properties(seed, d):
    g = Grid(d, 16 if d == 2 else 8)
    f = random_vfield(g, seed, band=3)
    n = lp_norm(f, 2)
    P = leray_project(f)
    X = xi_apply(f)
    assert lp_norm(leray_project(P) - P, 2) <= 1e-12 * n
    assert abs(lp_norm(P, 2) ** 2 + lp_norm(X, 2) ** 2 - n ** 2) <= 1e-10 * n ** 2
    assert abs(inner(P, X)) <= 1e-12 * n ** 2
    assert lp_norm(P, 2) <= n * (1 + 1e-14)
    gn = lp_norm(VectorField(g, gradient_tensor(f).reshape((-1,) + g.shape)), 2)
    assert lp_norm(div(P), 2) <= 1e-10 * gn
    assert lp_norm(curl(X), 2) <= 1e-10 * gn


def test_differential_examples(grid32):
    s = ScalarField.from_function(grid32, lambda x, y: np.sin(x))
    gs = grad(s).values
    x, y = grid32.coords()
    assert np.max(np.abs(gs[0] - np.cos(x))) < 1e-12 and np.max(np.abs(gs[1])) < 1e-12
    assert np.max(np.abs(laplacian(s).values + s.values)) < 1e-12


def test_vector_identities_3d():
    g = Grid(3, 16)
    A = random_vfield(g, 7, band=4)
    assert lp_norm(div(curl(A)), 2) <= 1e-12 * lp_norm(A, 2) * 4
    phi = A.component(0)
    assert lp_norm(curl(grad(phi)), 2) <= 1e-12 * lp_norm(phi, 2) * 16


def test_curl_needs_matching_components(grid32):
    with pytest.raises(ValueError):
        curl(VectorField(grid32, np.zeros((3,) + grid32.shape)))


def test_gradient_and_hessian_tensors(grid32):
    f = VectorField.from_function(grid32, lambda x, y: (np.sin(x) * np.cos(y), np.cos(2 * y)))
    G = gradient_tensor(f)
    x, y = grid32.coords()
    assert np.allclose(G[0, 0], np.cos(x) * np.cos(y), atol=1e-12)
    assert np.allclose(G[0, 1], -np.sin(x) * np.sin(y), atol=1e-12)
    assert np.allclose(G[1, 1], -2 * np.sin(2 * y), atol=1e-12)
    H = hessian_tensor(f)
    assert np.allclose(H[1, 1, 1], -4 * np.cos(2 * y), atol=1e-11)
    assert np.allclose(H[0, 0, 1], H[0, 1, 0], atol=1e-12)


def test_advection_examples(grid64):
    c = VectorField.constant(grid64, [0.3, -0.2])
    assert np.max(np.abs(advection(c).values)) < 1e-15
    tg = taylor_green_2d(grid64)
    adv = advection(tg)
    assert lp_norm(leray_project(adv), 2) <= 1e-10 * lp_norm(adv, 2)
    x, y = grid64.coords()
    # (u . grad) u = -(sin 2x, sin 2y) / 2 for this datum
    assert np.allclose(adv.values, -0.5 * np.stack([np.sin(2 * x), np.sin(2 * y)]), atol=1e-12)


@given(seed=st.integers(0, 10 ** 6))
def test_advection_is_energy_neutral(seed):
    g = Grid(2, 32)
    u = leray_project(random_vfield(g, seed, band=5))
    a = advection(u)
    assert abs(inner(a, u)) <= 1e-10 * lp_norm(a, 2) * lp_norm(u, 2)


def test_transport_dealiases(grid32):
    u = random_vfield(grid32, 1)
    out = transport(u, u)
    assert np.max(np.abs(out.spectral * ~grid32.dealias_mask())) == 0


@pytest.mark.parametrize("delta", [1.0, 2.0, 0.5, 3.7])
def test_absorbing_constant_certifies(delta):
    C = absorbing_constant(delta)
    assert C >= 1
    r = np.linspace(0, 20, 10 ** 4)
    assert np.all(r ** delta * np.exp(-r ** 2) <= C * np.exp(-r ** 2 / C) * (1 + 1e-12))
    # one grid step lower no longer certifies the closed-form supremum
    Cl = C / 1.01
    if Cl > 1 + 1e-6:
        a = 1 - 1 / Cl
        r2 = delta / (2 * a)
        assert r2 ** (delta / 2) * math.exp(-a * r2) > Cl


def test_absorbing_constant_edge_cases():
    assert absorbing_constant(0.0) == 1.0
    with pytest.raises(ValueError):
        absorbing_constant(-1.0)
