"""Periodic grids, sampled fields, spectral transforms and norms.

Every field lives on the torus ``[0, L)^d`` sampled at ``N`` points per axis.
Spectral coefficients follow the real-FFT layout of :func:`scipy.fft.rfftn`
over the spatial axes (unnormalised forward transform).
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import kernels

_THREADS = 1


def set_threads(n: int) -> None:
    """Number of workers handed to the FFT backend (results do not depend on it)."""
    global _THREADS
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _THREADS = int(n)


def get_threads() -> int:
    return _THREADS


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice with ``N`` points per axis in ``d`` dimensions."""

    d: int
    N: int
    L: float = 2 * np.pi

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.d}")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")
        if not self.L > 0:
            raise ValueError("domain length must be positive")
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def size(self) -> int:
        return self.N ** self.d

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    @property
    def spectral_shape(self) -> tuple:
        return (self.N,) * (self.d - 1) + (self.N // 2 + 1,)

    def axis(self) -> np.ndarray:
        return np.arange(self.N) * self.h

    def coords(self) -> list:
        """Node coordinates, one array of shape ``grid.shape`` per axis."""
        return np.meshgrid(*([self.axis()] * self.d), indexing="ij")

    def points(self) -> np.ndarray:
        """All nodes as an ``(N**d, d)`` array in row-major order."""
        return np.stack([c.ravel() for c in self.coords()], axis=1)

    def wavenumbers(self) -> tuple:
        """Broadcastable wavenumber arrays for the rfft layout."""
        return _wavenumbers(self)

    def k2(self) -> np.ndarray:
        return _k2(self)

    def dealias_mask(self) -> np.ndarray:
        return _dealias_mask(self)

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.d, self.N * factor, self.L)


@lru_cache(maxsize=None)
def _axis_wavenumbers(grid: Grid) -> tuple:
    scale = 2 * np.pi / grid.L
    full = sfft.fftfreq(grid.N, 1.0 / grid.N) * scale
    half = sfft.rfftfreq(grid.N, 1.0 / grid.N) * scale
    return full, half


@lru_cache(maxsize=None)
def _wavenumbers(grid: Grid) -> tuple:
    full, half = _axis_wavenumbers(grid)
    ks = []
    for ax in range(grid.d):
        shape = [1] * grid.d
        shape[ax] = -1
        ks.append((half if ax == grid.d - 1 else full).reshape(shape))
    return tuple(ks)


@lru_cache(maxsize=None)
def _k2(grid: Grid) -> np.ndarray:
    return sum(k * k for k in _wavenumbers(grid))


@lru_cache(maxsize=None)
def _dealias_mask(grid: Grid) -> np.ndarray:
    kmax = (2.0 / 3.0) * (grid.N // 2) * (2 * np.pi / grid.L)
    mask = np.ones(grid.spectral_shape, dtype=bool)
    for k in _wavenumbers(grid):
        mask = mask & (np.abs(k) < kmax)
    return mask


@lru_cache(maxsize=None)
def _eval_weights(grid: Grid) -> np.ndarray:
    """Weights turning the half spectrum into the full real trigonometric sum."""
    w = np.full(grid.N // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w / grid.size


def _fwd(values: np.ndarray, d: int) -> np.ndarray:
    return sfft.rfftn(values, axes=tuple(range(-d, 0)), workers=_THREADS)


def _inv(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.irfftn(coeffs, s=grid.shape, axes=tuple(range(-grid.d, 0)),
                       workers=_THREADS)


class _Field:
    """Immutable samples on a grid with lazily cached spectral coefficients."""

    def __init__(self, grid: Grid, values, spectral=None):
        values = np.array(values, dtype=np.float64)
        expected = self._expected_shape(grid, values)
        if values.shape != expected:
            raise ValueError(f"sample shape {values.shape} does not match {expected}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field samples must be finite")
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        if spectral is not None:
            spectral = np.asarray(spectral)
            spectral.setflags(write=False)
            self.__dict__["spectral"] = spectral

    def _expected_shape(self, grid, values):
        return grid.shape

    @cached_property
    def spectral(self) -> np.ndarray:
        coeffs = _fwd(self.values, self.grid.d)
        coeffs.setflags(write=False)
        return coeffs

    def _new(self, values):
        return type(self)(self.grid, values)

    def _other(self, other):
        if isinstance(other, _Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self._new(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._new(self.values - self._other(other))

    def __rsub__(self, other):
        return self._new(self._other(other) - self.values)

    def __mul__(self, c):
        if isinstance(c, _Field):
            raise TypeError("use operators for products of fields")
        return self._new(self.values * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self._new(self.values / c)

    def __neg__(self):
        return self._new(-self.values)

    def mean(self):
        axes = tuple(range(-self.grid.d, 0))
        return np.mean(self.values, axis=axes)


class ScalarField(_Field):
    """Real scalar samples of shape ``grid.shape``."""

    ncomp = 1

    @classmethod
    def from_function(cls, grid: Grid, func) -> "ScalarField":
        return cls(grid, func(*grid.coords()))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))


class VectorField(_Field):
    """Real vector samples of shape ``(ncomp,) + grid.shape``."""

    def _expected_shape(self, grid, values):
        if values.ndim == grid.d + 1:
            return (values.shape[0],) + grid.shape
        return (grid.d,) + grid.shape

    @property
    def ncomp(self) -> int:
        return self.values.shape[0]

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.values[i])

    @classmethod
    def from_components(cls, comps) -> "VectorField":
        comps = list(comps)
        grid = comps[0].grid
        return cls(grid, np.stack([c.values for c in comps]))

    @classmethod
    def from_function(cls, grid: Grid, func) -> "VectorField":
        return cls(grid, np.stack(func(*grid.coords())))

    @classmethod
    def zeros(cls, grid: Grid, ncomp: int | None = None) -> "VectorField":
        return cls(grid, np.zeros((ncomp or grid.d,) + grid.shape))

    @classmethod
    def constant(cls, grid: Grid, vector) -> "VectorField":
        vector = np.asarray(vector, dtype=float)
        return cls(grid, vector.reshape((-1,) + (1,) * grid.d) * np.ones(grid.shape))


def field_like(grid: Grid, values):
    """Wrap raw samples in the matching field type."""
    values = np.asarray(values)
    if values.shape == grid.shape:
        return ScalarField(grid, values)
    return VectorField(grid, values)


def spectral_forward(field: _Field) -> np.ndarray:
    """Spectral coefficients of ``field`` (rfft layout, unnormalised)."""
    return field.spectral


def spectral_inverse(coeffs, grid: Grid):
    """Field with the given spectral coefficients.

    A ``grid.spectral_shape`` array gives a :class:`ScalarField`; a leading
    component axis gives a :class:`VectorField`.
    """
    coeffs = np.asarray(coeffs)
    if coeffs.shape[-grid.d:] != grid.spectral_shape or coeffs.ndim not in (grid.d, grid.d + 1):
        raise ValueError(f"coefficient shape {coeffs.shape} does not fit grid {grid}")
    values = _inv(coeffs, grid)
    if coeffs.ndim == grid.d:
        return ScalarField(grid, values, spectral=coeffs.copy())
    return VectorField(grid, values, spectral=coeffs.copy())


def _magnitude(values: np.ndarray, vector: bool) -> np.ndarray:
    if vector:
        return np.sqrt(np.sum(values ** 2, axis=0))
    return np.abs(values)


def _pairwise_sum(a: np.ndarray) -> float:
    # numpy reduces contiguous 1-d arrays pairwise; keep the order fixed
    return float(np.sum(np.ascontiguousarray(a).ravel()))


def _pad_axis(c: np.ndarray, axis: int, n: int, nf: int) -> np.ndarray:
    half = n // 2
    shape = list(c.shape)
    shape[axis] = nf
    out = np.zeros(shape, dtype=complex)

    def sl(a, b):
        idx = [slice(None)] * c.ndim
        idx[axis] = slice(a, b)
        return tuple(idx)

    out[sl(0, half)] = c[sl(0, half)]
    out[sl(nf - half + 1, nf)] = c[sl(half + 1, n)]
    nyq = 0.5 * c[sl(half, half + 1)]
    out[sl(half, half + 1)] = nyq
    out[sl(nf - half, nf - half + 1)] = nyq
    return out


def oversample(field: _Field, factor: int = 2) -> _Field:
    """Exact trigonometric resampling on a grid ``factor`` times finer.

    Nyquist modes are split evenly between the two signed frequencies.
    """
    grid = field.grid
    fine = grid.refined(factor)
    axes = tuple(range(-grid.d, 0))
    c = sfft.fftn(field.values, axes=axes, workers=_THREADS)
    for ax in axes:
        c = _pad_axis(c, ax, grid.N, fine.N)
    values = sfft.ifftn(c, axes=axes, workers=_THREADS).real * factor ** grid.d
    return type(field)(fine, values)


def lp_norm(field: _Field, p: float) -> float:
    """Rectangle-rule L^p norm of the pointwise (Euclidean) magnitude.

    ``p = inf`` returns the maximum over a 2x trigonometrically oversampled
    grid, which is a lower bound for the true supremum.
    """
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    vector = isinstance(field, VectorField)
    # work with samples scaled to max 1 so powers neither under- nor overflow
    scale = float(np.max(np.abs(field.values)))
    if scale == 0:
        return 0.0
    if np.isinf(p):
        fine = oversample(type(field)(field.grid, field.values / scale), 2)
        return float(scale * np.max(_magnitude(fine.values, vector)))
    mag = _magnitude(field.values / scale, vector)
    vol = field.grid.cell_volume
    if p == 2:
        return float(scale * np.sqrt(vol * _pairwise_sum(mag * mag)))
    if p == 1:
        return float(scale * vol * _pairwise_sum(mag))
    return float(scale * (vol * _pairwise_sum(mag ** p)) ** (1.0 / p))


def inner(f: _Field, g: _Field) -> float:
    """Rectangle-rule L^2 inner product."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    return f.grid.cell_volume * _pairwise_sum(f.values * g.values)


def parseval_norm2(field: _Field) -> float:
    """Squared L^2 norm from the spectral coefficients."""
    grid = field.grid
    c = field.spectral
    w = np.full(grid.N // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    s = _pairwise_sum(np.abs(c) ** 2 * w)
    return grid.cell_volume * s / grid.size


def eval_coefficients(field: _Field) -> np.ndarray:
    """Half-spectrum coefficients scaled so that evaluation is a plain sum."""
    c = field.spectral * _eval_weights(field.grid)
    if c.ndim == field.grid.d:
        c = c[None]
    return np.ascontiguousarray(c, dtype=np.complex128)


def evaluate_coefficients(coef: np.ndarray, grid: Grid, points) -> np.ndarray:
    """Evaluate prepared coefficients (see :func:`eval_coefficients`) at points.

    Returns an array of shape ``(M, ncomp)``.
    """
    pts = np.ascontiguousarray(np.mod(np.atleast_2d(points), grid.L), dtype=np.float64)
    full, half = _axis_wavenumbers(grid)
    if grid.d == 2:
        return kernels.trig_eval_2d(coef, full, half, pts)
    return kernels.trig_eval_3d(coef, full, full, half, pts)


def trimmed_coefficients(coef: np.ndarray, grid: Grid, rtol: float = 1e-15) -> tuple:
    """Drop the spectral box outside which every prepared coefficient is tiny.

    Coefficients with ``|c| <= rtol * max|c|`` beyond the retained box are
    discarded; the evaluation error is at most ``N**d * rtol * max|c|``.
    Returns ``(coef, wavenumber arrays per axis)``.
    """
    full, half = _axis_wavenumbers(grid)
    kint_full = np.rint(full * grid.L / (2 * np.pi)).astype(int)
    mag = np.max(np.abs(coef), axis=0)
    big = mag > rtol * (mag.max() if mag.size else 0.0)
    if not big.any():
        big.flat[0] = True
    sel = []
    ks = []
    for ax in range(grid.d):
        other = tuple(a for a in range(grid.d) if a != ax)
        used = np.any(big, axis=other)
        if ax == grid.d - 1:
            K = int(np.nonzero(used)[0].max())
            idx = np.arange(K + 1)
            ks.append(half[idx])
        else:
            K = int(np.abs(kint_full[used]).max())
            idx = np.nonzero(np.abs(kint_full) <= K)[0]
            ks.append(full[idx])
        sel.append(idx)
    out = coef[(slice(None),) + np.ix_(*sel)]
    return np.ascontiguousarray(out), [np.ascontiguousarray(k) for k in ks]


def evaluate_trimmed(coef: np.ndarray, grid: Grid, points, rtol: float = 1e-15) -> np.ndarray:
    """Like :func:`evaluate_coefficients` after :func:`trimmed_coefficients`."""
    c, ks = trimmed_coefficients(coef, grid, rtol)
    pts = np.ascontiguousarray(np.mod(np.atleast_2d(points), grid.L), dtype=np.float64)
    if grid.d == 2:
        return kernels.trig_eval_2d(c, ks[0], ks[1], pts)
    return kernels.trig_eval_3d(c, ks[0], ks[1], ks[2], pts)


def evaluate_offgrid(field: _Field, points):
    """Trigonometric interpolant of ``field`` at arbitrary points.

    ``points`` is a single ``(d,)`` point or an ``(M, d)`` array; coordinates
    are wrapped onto the torus. Scalars come back as ``(M,)`` (or a float),
    vectors as ``(M, ncomp)`` (or ``(ncomp,)``).
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    if pts.shape[-1] != field.grid.d:
        raise ValueError("point dimension does not match grid")
    out = evaluate_coefficients(eval_coefficients(field), field.grid, pts)
    if isinstance(field, ScalarField):
        out = out[:, 0]
    return out[0] if single else out


@dataclass(frozen=True)
class TimePartition:
    """Uniform slicing of ``[0, T]`` into ``n`` pieces."""

    T: float
    n: int

    def __post_init__(self):
        if self.n < 1 or not self.T > 0:
            raise ValueError("need T > 0 and n >= 1")

    def knot(self, k: int) -> float:
        if not 0 <= k <= self.n:
            raise IndexError(k)
        return self.T if k == self.n else k * self.T / self.n

    @property
    def knots(self) -> np.ndarray:
        return np.array([self.knot(k) for k in range(self.n + 1)])

    def slice(self, k: int) -> tuple:
        return self.knot(k), self.knot(k + 1)


class Trajectory:
    """Uniformly spaced velocity snapshots ``u(t0 + j*dt)``.

    Velocities between snapshots are linear in time.
    """

    def __init__(self, fields, t0: float, dt: float, nu: float):
        fields = list(fields)
        if not fields:
            raise ValueError("empty trajectory")
        if len(fields) > 1 and not dt > 0:
            raise ValueError("dt must be positive")
        self.fields = fields
        self.t0 = float(t0)
        self.dt = float(dt)
        self.nu = float(nu)
        self.grid = fields[0].grid
        self._coef_cache = {}

    def __len__(self):
        return len(self.fields)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.fields))

    @property
    def horizon(self) -> float:
        return self.t0 + self.dt * (len(self.fields) - 1)

    def _locate(self, t: float) -> tuple:
        span = self.horizon - self.t0
        tol = 1e-12 * max(1.0, abs(self.horizon))
        if t < self.t0 - tol or t > self.horizon + tol:
            raise ValueError(f"time {t} outside trajectory [{self.t0}, {self.horizon}]")
        if len(self.fields) == 1 or span == 0:
            return 0, 0.0
        x = (t - self.t0) / self.dt
        j = int(np.floor(x))
        j = min(max(j, 0), len(self.fields) - 2)
        w = min(max(x - j, 0.0), 1.0)
        return j, w

    def at(self, t: float) -> VectorField:
        """Velocity at time ``t`` (linear interpolation between snapshots)."""
        j, w = self._locate(t)
        if w == 0.0:
            return self.fields[j]
        if w == 1.0:
            return self.fields[j + 1]
        return VectorField(self.grid, (1 - w) * self.fields[j].values + w * self.fields[j + 1].values)

    def _eval_coef(self, j: int) -> np.ndarray:
        c = self._coef_cache.get(j)
        if c is None:
            c = eval_coefficients(self.fields[j])
            if len(self._coef_cache) > 64:
                self._coef_cache.clear()
            self._coef_cache[j] = c
        return c

    def velocity_at_points(self, t: float, points: np.ndarray) -> np.ndarray:
        """Velocity at time ``t`` and arbitrary points, shape ``(M, d)``."""
        j, w = self._locate(t)
        if w == 0.0 or len(self.fields) == 1:
            coef = self._eval_coef(j)
        elif w == 1.0:
            coef = self._eval_coef(j + 1)
        else:
            coef = (1 - w) * self._eval_coef(j) + w * self._eval_coef(j + 1)
        return evaluate_trimmed(coef, self.grid, points)

    def divergence_residual(self) -> float:
        """Largest ``||div u||_2 / ||grad u||_2`` over snapshots."""
        worst = 0.0
        ks = self.grid.wavenumbers()
        for f in self.fields:
            c = f.spectral
            div = sum(1j * ks[i] * c[i] for i in range(self.grid.d))
            gradn = sum(np.sum(np.abs(ks[j] * c[i]) ** 2) for i in range(self.grid.d)
                        for j in range(self.grid.d))
            if gradn == 0:
                continue
            worst = max(worst, float(np.sqrt(np.sum(np.abs(div) ** 2) / gradn)))
        return worst


# -- snapshot files --------------------------------------------------------

_MAGIC = b"NSPF"
_HEADER = struct.Struct("<4sIIIIdd")


def write_snapshot(path, field: _Field, time: float = 0.0) -> None:
    """Binary snapshot: header then row-major little-endian float64 samples.

    Header layout: magic ``NSPF``, version, d, N, component count (uint32
    each), L and time (float64).
    """
    grid = field.grid
    ncomp = 1 if isinstance(field, ScalarField) else field.ncomp
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, grid.d, grid.N, ncomp, grid.L, float(time)))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_snapshot(path, vector: bool | None = None) -> tuple:
    """Inverse of :func:`write_snapshot`; returns ``(field, time)``."""
    raw = Path(path).read_bytes()
    magic, version, d, N, ncomp, L, time = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != 1:
        raise ValueError(f"{path}: not a snapshot file")
    grid = Grid(d, N, L)
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if data.size != ncomp * grid.size:
        raise ValueError(f"{path}: truncated snapshot")
    if vector is None:
        vector = ncomp > 1
    if vector:
        return VectorField(grid, data.reshape((ncomp,) + grid.shape)), time
    return ScalarField(grid, data.reshape(grid.shape)), time


def write_field_csv(path, field: _Field) -> None:
    """Plot-friendly CSV: node coordinates followed by the components."""
    grid = field.grid
    pts = grid.points()
    vals = field.values.reshape(-1, grid.size).T if isinstance(field, VectorField) \
        else field.values.reshape(-1, 1)
    names = [f"x{i + 1}" for i in range(grid.d)] + [f"c{i}" for i in range(vals.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for p, v in zip(pts, vals):
            w.writerow([repr(float(a)) for a in p] + [repr(float(b)) for b in v])
