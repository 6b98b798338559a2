# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: trigonometric evaluation and Gaussian stencil sums.

Each output point is computed by an independent serial loop, so results do
not depend on how many threads call in.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, exp, floor, ceil

cnp.import_array()


def trig_eval_2d(coef, double[::1] k0, double[::1] k1, double[:, ::1] pts):
    """Real part of ``sum_ab coef[c, a, b] exp(i (k0[a] x + k1[b] y))`` per point."""
    # interleaved (re, im) view; complex products are spelled out in real
    # arithmetic so the compiler does not route them through __muldc3
    cdef double[:, :, ::1] cf = np.ascontiguousarray(coef, dtype=np.complex128).view(np.float64)
    cdef Py_ssize_t C = cf.shape[0], n0 = cf.shape[1], n1 = cf.shape[2] // 2
    cdef Py_ssize_t M = pts.shape[0]
    cdef Py_ssize_t p, c, a, b
    cdef double ir, ii, acc, cr, ci
    out = np.empty((M, C), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[:, ::1] e0 = np.empty((n0, 2), dtype=np.float64)
    cdef double[:, ::1] e1 = np.empty((n1, 2), dtype=np.float64)
    with nogil:
        for p in range(M):
            for a in range(n0):
                e0[a, 0] = cos(k0[a] * pts[p, 0])
                e0[a, 1] = sin(k0[a] * pts[p, 0])
            for b in range(n1):
                e1[b, 0] = cos(k1[b] * pts[p, 1])
                e1[b, 1] = sin(k1[b] * pts[p, 1])
            for c in range(C):
                acc = 0.0
                for a in range(n0):
                    ir = 0.0
                    ii = 0.0
                    for b in range(n1):
                        cr = cf[c, a, 2 * b]
                        ci = cf[c, a, 2 * b + 1]
                        ir = ir + cr * e1[b, 0] - ci * e1[b, 1]
                        ii = ii + cr * e1[b, 1] + ci * e1[b, 0]
                    acc = acc + ir * e0[a, 0] - ii * e0[a, 1]
                o[p, c] = acc
    return out


def trig_eval_3d(coef, double[::1] k0, double[::1] k1, double[::1] k2, double[:, ::1] pts):
    """3D analogue of :func:`trig_eval_2d`."""
    cdef double[:, :, :, ::1] cf = np.ascontiguousarray(coef, dtype=np.complex128).view(np.float64)
    cdef Py_ssize_t C = cf.shape[0], n0 = cf.shape[1], n1 = cf.shape[2]
    cdef Py_ssize_t n2 = cf.shape[3] // 2
    cdef Py_ssize_t M = pts.shape[0]
    cdef Py_ssize_t p, c, a, b, q
    cdef double ir, ii, mr, mi, acc, cr, ci
    out = np.empty((M, C), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[:, ::1] e0 = np.empty((n0, 2), dtype=np.float64)
    cdef double[:, ::1] e1 = np.empty((n1, 2), dtype=np.float64)
    cdef double[:, ::1] e2 = np.empty((n2, 2), dtype=np.float64)
    with nogil:
        for p in range(M):
            for a in range(n0):
                e0[a, 0] = cos(k0[a] * pts[p, 0])
                e0[a, 1] = sin(k0[a] * pts[p, 0])
            for b in range(n1):
                e1[b, 0] = cos(k1[b] * pts[p, 1])
                e1[b, 1] = sin(k1[b] * pts[p, 1])
            for q in range(n2):
                e2[q, 0] = cos(k2[q] * pts[p, 2])
                e2[q, 1] = sin(k2[q] * pts[p, 2])
            for c in range(C):
                acc = 0.0
                for a in range(n0):
                    mr = 0.0
                    mi = 0.0
                    for b in range(n1):
                        ir = 0.0
                        ii = 0.0
                        for q in range(n2):
                            cr = cf[c, a, b, 2 * q]
                            ci = cf[c, a, b, 2 * q + 1]
                            ir = ir + cr * e2[q, 0] - ci * e2[q, 1]
                            ii = ii + cr * e2[q, 1] + ci * e2[q, 0]
                        mr = mr + ir * e1[b, 0] - ii * e1[b, 1]
                        mi = mi + ir * e1[b, 1] + ii * e1[b, 0]
                    acc = acc + mr * e0[a, 0] - mi * e0[a, 1]
                o[p, c] = acc
    return out


def gaussian_average_2d(double[:, :, ::1] vals, double[:, ::1] centers, double sigma,
                        double h, double radius):
    """Mass-normalised Gaussian average of grid values around each center.

    Returns (averages (M, C), first moments (M, 2), raw mass (M,)).
    """
    cdef Py_ssize_t C = vals.shape[0], N = vals.shape[1]
    cdef Py_ssize_t M = centers.shape[0]
    cdef Py_ssize_t p, c, i, j, ii, jj, i_lo, i_hi, j_lo, j_hi
    cdef double dx, dy, w, wsum, inv2s2 = 1.0 / (2.0 * sigma * sigma)
    cdef double mx, my
    avg = np.zeros((M, C), dtype=np.float64)
    mom = np.zeros((M, 2), dtype=np.float64)
    mass = np.zeros(M, dtype=np.float64)
    cdef double[:, ::1] av = avg
    cdef double[:, ::1] mo = mom
    cdef double[::1] ma = mass
    with nogil:
        for p in range(M):
            i_lo = <Py_ssize_t>ceil((centers[p, 0] - radius) / h)
            i_hi = <Py_ssize_t>floor((centers[p, 0] + radius) / h)
            j_lo = <Py_ssize_t>ceil((centers[p, 1] - radius) / h)
            j_hi = <Py_ssize_t>floor((centers[p, 1] + radius) / h)
            wsum = 0.0
            mx = 0.0
            my = 0.0
            for i in range(i_lo, i_hi + 1):
                dx = i * h - centers[p, 0]
                ii = i % N
                if ii < 0:
                    ii = ii + N
                for j in range(j_lo, j_hi + 1):
                    dy = j * h - centers[p, 1]
                    if dx * dx + dy * dy > radius * radius:
                        continue
                    jj = j % N
                    if jj < 0:
                        jj = jj + N
                    w = exp(-(dx * dx + dy * dy) * inv2s2)
                    wsum = wsum + w
                    mx = mx + w * dx
                    my = my + w * dy
                    for c in range(C):
                        av[p, c] = av[p, c] + w * vals[c, ii, jj]
            for c in range(C):
                av[p, c] = av[p, c] / wsum
            mo[p, 0] = mx / wsum
            mo[p, 1] = my / wsum
            ma[p] = wsum
    return avg, mom, mass


def gaussian_average_3d(double[:, :, :, ::1] vals, double[:, ::1] centers, double sigma,
                        double h, double radius):
    cdef Py_ssize_t C = vals.shape[0], N = vals.shape[1]
    cdef Py_ssize_t M = centers.shape[0]
    cdef Py_ssize_t p, c, i, j, l, ii, jj, ll
    cdef Py_ssize_t i_lo, i_hi, j_lo, j_hi, l_lo, l_hi
    cdef double dx, dy, dz, r2, w, wsum, inv2s2 = 1.0 / (2.0 * sigma * sigma)
    cdef double mx, my, mz
    avg = np.zeros((M, C), dtype=np.float64)
    mom = np.zeros((M, 3), dtype=np.float64)
    mass = np.zeros(M, dtype=np.float64)
    cdef double[:, ::1] av = avg
    cdef double[:, ::1] mo = mom
    cdef double[::1] ma = mass
    with nogil:
        for p in range(M):
            i_lo = <Py_ssize_t>ceil((centers[p, 0] - radius) / h)
            i_hi = <Py_ssize_t>floor((centers[p, 0] + radius) / h)
            j_lo = <Py_ssize_t>ceil((centers[p, 1] - radius) / h)
            j_hi = <Py_ssize_t>floor((centers[p, 1] + radius) / h)
            l_lo = <Py_ssize_t>ceil((centers[p, 2] - radius) / h)
            l_hi = <Py_ssize_t>floor((centers[p, 2] + radius) / h)
            wsum = 0.0
            mx = 0.0
            my = 0.0
            mz = 0.0
            for i in range(i_lo, i_hi + 1):
                dx = i * h - centers[p, 0]
                ii = i % N
                if ii < 0:
                    ii = ii + N
                for j in range(j_lo, j_hi + 1):
                    dy = j * h - centers[p, 1]
                    jj = j % N
                    if jj < 0:
                        jj = jj + N
                    for l in range(l_lo, l_hi + 1):
                        dz = l * h - centers[p, 2]
                        r2 = dx * dx + dy * dy + dz * dz
                        if r2 > radius * radius:
                            continue
                        ll = l % N
                        if ll < 0:
                            ll = ll + N
                        w = exp(-r2 * inv2s2)
                        wsum = wsum + w
                        mx = mx + w * dx
                        my = my + w * dy
                        mz = mz + w * dz
                        for c in range(C):
                            av[p, c] = av[p, c] + w * vals[c, ii, jj, ll]
            for c in range(C):
                av[p, c] = av[p, c] / wsum
            mo[p, 0] = mx / wsum
            mo[p, 1] = my / wsum
            mo[p, 2] = mz / wsum
            ma[p] = wsum
    return avg, mom, mass
