# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled power-control kernels.

Mirrors ``_kernels_py`` operation for operation; build with
``-ffp-contract=off`` so no fused multiply-adds change the rounding.
"""
import numpy as np

from . import _kernels_py
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()

cdef void _matvec(const double[:, ::1] cross, const double[::1] rho,
                  double[::1] out) noexcept nogil:
    cdef Py_ssize_t k = cross.shape[0], n = cross.shape[1], i, j
    cdef double s, c, y, t
    for i in range(k):
        s = 0.0
        c = 0.0
        for j in range(n):
            y = cross[i, j] * rho[j]
            t = s + y
            if fabs(s) >= fabs(y):
                c += (s - t) + y
            else:
                c += (y - t) + s
            s = t
        out[i] = s + c


def compensated_matvec(cross, rho):
    cdef double[:, ::1] a = np.ascontiguousarray(cross, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(rho, dtype=np.float64)
    out = np.empty(a.shape[0])
    cdef double[::1] o = out
    with nogil:
        _matvec(a, r, o)
    return out


def power_iteration(gain2, cross, noise, xi, pmax, rho0, mu, double eps, int max_iters):
    cdef double[::1] g2 = np.ascontiguousarray(gain2, dtype=np.float64)
    off_arr, diag_arr = _kernels_py.split_cross(cross)
    cdef double[:, ::1] a = off_arr
    cdef double[::1] dg = diag_arr
    cdef double[::1] no = np.ascontiguousarray(noise, dtype=np.float64)
    cdef double[::1] x = np.ascontiguousarray(xi, dtype=np.float64)
    cdef double[::1] pm = np.ascontiguousarray(pmax, dtype=np.float64)
    cdef double[::1] m = np.ascontiguousarray(mu, dtype=np.float64)
    rho_arr = np.array(rho0, dtype=np.float64)
    cdef double[::1] rho = rho_arr
    cdef Py_ssize_t k = rho.shape[0], i
    new_arr = np.empty(k)
    oth_arr = np.empty(k)
    ds_arr = np.empty(k)
    cdef double[::1] new = new_arr
    cdef double[::1] oth = oth_arr
    cdef double[::1] ds = ds_arr
    totals_arr = np.empty(max_iters + 1)
    sinr_arr = np.empty(max_iters + 1)
    cdef double[::1] totals = totals_arr
    cdef double[::1] msinr = sinr_arr
    cdef int it = 0
    cdef bint converged = False
    cdef double total, old_total, ratio, need, soft, step, d, v, best

    for i in range(k):
        ds[i] = g2[i] - x[i] * dg[i]
    total = 0.0
    for i in range(k):
        total += rho[i]
    totals[0] = total
    with nogil:
        while it < max_iters:
            _matvec(a, rho, oth)
            best = INFINITY
            for i in range(k):
                oth[i] = oth[i] + no[i]
                v = rho[i] * g2[i] / (oth[i] + dg[i] * rho[i])
                if v < best:
                    best = v
            msinr[it] = best
            step = 0.0
            for i in range(k):
                if ds[i] > 0.0:
                    need = x[i] * oth[i] / ds[i]
                else:
                    need = INFINITY
                if m[i] > 0.0:
                    soft = pm[i] * pm[i] / (m[i] * need)
                    new[i] = soft if soft < pm[i] else pm[i]
                else:
                    new[i] = need if need < pm[i] else pm[i]
                d = fabs(new[i] - rho[i]) / pm[i]
                if d > step:
                    step = d
            it += 1
            old_total = totals[it - 1]
            total = 0.0
            for i in range(k):
                rho[i] = new[i]
                total += rho[i]
            totals[it] = total
            if old_total > 0.0:
                ratio = fabs(total - old_total) / old_total
            elif total == 0.0:
                ratio = 0.0
            else:
                ratio = INFINITY
            if ratio <= eps and step <= eps:
                converged = True
                break
        _matvec(a, rho, oth)
        best = INFINITY
        for i in range(k):
            oth[i] = oth[i] + no[i]
            v = rho[i] * g2[i] / (oth[i] + dg[i] * rho[i])
            if v < best:
                best = v
        msinr[it] = best
    return rho_arr, it, bool(converged), totals_arr[:it + 1].copy(), sinr_arr[:it + 1].copy()
