# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``.

Same signatures and return conventions; see that module for the math.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow, sqrt

cnp.import_array()

cdef double S_SWITCH = 5.0
cdef int SERIES_TERMS = 80


cdef void _coeffs(double alpha, double[::1] out) noexcept:
    cdef int k
    out[0] = 1.0
    for k in range(1, SERIES_TERMS + 1):
        out[k] = out[k - 1] * (alpha - k + 1) / k


cdef inline double _series(double z, double[::1] coeffs) noexcept nogil:
    """(1 + z)^alpha - 1 - alpha z summed forward until the terms drop below rounding."""
    cdef double zk = z * z, term, acc = 0.0
    cdef int k
    for k in range(2, SERIES_TERMS + 1):
        term = coeffs[k] * zk
        acc += term
        if fabs(term) <= 1e-17 * fabs(acc):
            break
        zk *= z
    return acc


cdef inline double _g_pow(double s, double c, double p, double sp, double sp1, double sp2,
                          double[::1] coeffs) noexcept nogil:
    """g(s, c) with sp = s^p, sp1 = s^(p-1), sp2 = s^(p-2) supplied by the caller."""
    cdef double q, z
    if p == 2.0:
        return 1.0
    if s < S_SWITCH:
        q = 1.0 + 2.0 * s * c + s * s
        if q < 0.0:
            q = 0.0
        return pow(q, 0.5 * p) - sp - p * sp1 * c
    z = (1.0 + 2.0 * s * c) / (s * s)
    return 0.5 * p * sp2 + sp * _series(z, coeffs)


cdef inline double _g(double s, double c, double p, double[::1] coeffs) noexcept nogil:
    cdef double sp
    if s == 0.0:
        return _g_pow(s, c, p, pow(s, p), pow(s, p - 1.0), pow(s, p - 2.0), coeffs)
    sp = pow(s, p)
    return _g_pow(s, c, p, sp, sp / s, sp / (s * s), coeffs)


def reduced_T(s, c, double p):
    s_b, c_b = np.broadcast_arrays(np.asarray(s, dtype=np.float64), np.asarray(c, dtype=np.float64))
    cdef double[::1] sv = np.ascontiguousarray(s_b).ravel()
    cdef double[::1] cv = np.ascontiguousarray(c_b).ravel()
    cdef Py_ssize_t n = sv.shape[0], i
    out = np.empty(n)
    cdef double[::1] ov = out
    cdef double[::1] coeffs = np.empty(SERIES_TERMS + 1)
    _coeffs(0.5 * p, coeffs)
    with nogil:
        for i in range(n):
            ov[i] = _g(sv[i], cv[i], p, coeffs)
    return out.reshape(s_b.shape)


def scan_extremum(s_nodes, theta_nodes, double p, double norm_exponent, bint maximize):
    cdef double[::1] sv = np.ascontiguousarray(s_nodes, dtype=np.float64)
    cdef double[::1] cv = np.cos(np.ascontiguousarray(theta_nodes, dtype=np.float64))
    cdef Py_ssize_t ns = sv.shape[0], nt = cv.shape[0], i, j
    cdef Py_ssize_t bi = 0, bj = 0
    cdef double best, v, scale, sp, sp1, sp2
    cdef double[::1] coeffs = np.empty(SERIES_TERMS + 1)
    _coeffs(0.5 * p, coeffs)
    best = np.nan
    with nogil:
        for i in range(ns):
            scale = 1.0
            if norm_exponent != 0.0:
                scale = pow(1.0 + sv[i], norm_exponent)
            sp = pow(sv[i], p)
            sp1 = pow(sv[i], p - 1.0)
            sp2 = pow(sv[i], p - 2.0)
            for j in range(nt):
                v = _g_pow(sv[i], cv[j], p, sp, sp1, sp2, coeffs) / scale
                if (i == 0 and j == 0) or (maximize and v > best) or (not maximize and v < best):
                    best = v
                    bi = i
                    bj = j
    return best, bi, bj


def first_below(s, c, double p, double threshold):
    cdef double[::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t n = sv.shape[0], i
    cdef Py_ssize_t hit = -1
    cdef double[::1] coeffs = np.empty(SERIES_TERMS + 1)
    _coeffs(0.5 * p, coeffs)
    with nogil:
        for i in range(n):
            if _g(sv[i], cv[i], p, coeffs) < threshold:
                hit = i
                break
    return hit


def staggered_energy(u, dr, weight, kappa2, double p, bint want_grad):
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] drv = np.ascontiguousarray(dr, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(weight, dtype=np.float64)
    cdef double[::1] kv = np.ascontiguousarray(kappa2, dtype=np.float64)
    cdef Py_ssize_t m = drv.shape[0], i
    cell = np.empty(m)
    cdef double[::1] cellv = cell
    cdef double du, ub, sq, fac, half = 0.5 * p - 1.0
    grad = np.zeros(m + 1) if want_grad else None
    cdef double[::1] gv
    if want_grad:
        gv = grad
    with nogil:
        for i in range(m):
            du = (uv[i + 1] - uv[i]) / drv[i]
            ub = 0.5 * (uv[i + 1] + uv[i])
            sq = du * du + kv[i] * ub * ub
            # one pow per cell: sq^(p/2) = sq^(p/2 - 1) * sq
            if half == 0.0:
                fac = 1.0
            elif half == 0.5:
                fac = sqrt(sq)
            elif half == 1.0:
                fac = sq
            else:
                fac = pow(sq, half)
            cellv[i] = wv[i] * fac * sq
            if want_grad:
                fac = wv[i] * p * fac
                gv[i] += fac * (-du / drv[i] + 0.5 * kv[i] * ub)
                gv[i + 1] += fac * (du / drv[i] + 0.5 * kv[i] * ub)
    return cell, grad
