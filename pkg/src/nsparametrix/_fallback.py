"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and the same arithmetic up to summation order.
"""
import numpy as np

_CHUNK = 2048


def _phases(k, x):
    return np.exp(1j * np.multiply.outer(x, k))


def trig_eval_2d(coef, k0, k1, pts):
    pts = np.ascontiguousarray(pts, dtype=float)
    out = np.empty((pts.shape[0], coef.shape[0]))
    for lo in range(0, pts.shape[0], _CHUNK):
        p = pts[lo:lo + _CHUNK]
        e0 = _phases(k0, p[:, 0])
        e1 = _phases(k1, p[:, 1])
        for c in range(coef.shape[0]):
            inner = e1 @ coef[c].T                      # (P, n0)
            out[lo:lo + _CHUNK, c] = np.sum(inner * e0, axis=1).real
    return out


def trig_eval_3d(coef, k0, k1, k2, pts):
    pts = np.ascontiguousarray(pts, dtype=float)
    out = np.empty((pts.shape[0], coef.shape[0]))
    chunk = max(1, _CHUNK // 8)
    for lo in range(0, pts.shape[0], chunk):
        p = pts[lo:lo + chunk]
        e0 = _phases(k0, p[:, 0])
        e1 = _phases(k1, p[:, 1])
        e2 = _phases(k2, p[:, 2])
        for c in range(coef.shape[0]):
            inner = np.einsum("abq,pq->pab", coef[c], e2)
            mid = np.einsum("pab,pb->pa", inner, e1)
            out[lo:lo + chunk, c] = np.sum(mid * e0, axis=1).real
    return out


def _gaussian_average(vals, centers, sigma, h, radius):
    d = centers.shape[1]
    N = vals.shape[1]
    C = vals.shape[0]
    M = centers.shape[0]
    avg = np.zeros((M, C))
    mom = np.zeros((M, d))
    wsum = np.zeros(M)
    base = np.ceil((centers - radius) / h).astype(np.int64)
    span = int(np.floor(2 * radius / h)) + 2
    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    flat = vals.reshape(C, -1)
    for offset in np.ndindex(*(span,) * d):
        idx = base + np.asarray(offset)
        disp = idx * h - centers
        r2 = np.sum(disp * disp, axis=1)
        inside = r2 <= radius * radius
        if not inside.any():
            continue
        w = np.where(inside, np.exp(-r2 * inv2s2), 0.0)
        lin = np.ravel_multi_index(tuple((idx % N).T), (N,) * d)
        wsum += w
        mom += w[:, None] * disp
        avg += w[:, None] * flat[:, lin].T
    return avg / wsum[:, None], mom / wsum[:, None], wsum


def gaussian_average_2d(vals, centers, sigma, h, radius):
    return _gaussian_average(vals, centers, sigma, h, radius)


def gaussian_average_3d(vals, centers, sigma, h, radius):
    return _gaussian_average(vals, centers, sigma, h, radius)
