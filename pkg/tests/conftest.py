import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nsparametrix import Grid, Trajectory, VectorField
from nsparametrix.solver import solve, taylor_green_2d

settings.register_profile(
    "repo", deadline=None, max_examples=25, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("repo")


def random_vfield(grid, seed, band=None):
    """Band-limited random vector field, not solenoidal."""
    rng = np.random.default_rng(seed)
    band = band or grid.N // 4
    k = np.meshgrid(*([np.fft.fftfreq(grid.N, 1.0 / grid.N)] * grid.d), indexing="ij")
    keep = np.sqrt(sum(kk * kk for kk in k)) <= band
    shape = (grid.d,) + grid.shape
    c = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * keep
    return VectorField(grid, np.fft.ifftn(c, axes=tuple(range(1, grid.d + 1))).real)


def uniform_trajectory(grid, velocity, T=1.0, count=11, nu=0.1):
    """Spatially constant velocity ``velocity(t)`` sampled on ``count`` snapshots."""
    dt = T / (count - 1)
    fields = [VectorField.constant(grid, velocity(j * dt)) for j in range(count)]
    return Trajectory(fields, 0.0, dt, nu)


@pytest.fixture(scope="session")
def grid64():
    return Grid(2, 64)


@pytest.fixture(scope="session")
def grid32():
    return Grid(2, 32)


@pytest.fixture(scope="session")
def tg_traj(grid64):
    """Reference 2D Taylor-Green run: N=64, nu=0.1, T=1, dt=1e-3."""
    return solve(taylor_green_2d(grid64), None, 0.1, 1.0, 1e-3)


@pytest.fixture(scope="session")
def tg_short(grid32):
    """Coarser Taylor-Green run for quick parametrix checks."""
    return solve(taylor_green_2d(grid32), None, 0.1, 0.5, 5e-3)


@pytest.fixture(scope="session")
def zero_traj(grid32):
    return Trajectory([VectorField.zeros(grid32)] * 11, 0.0, 0.05, 0.1)


# criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
