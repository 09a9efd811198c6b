# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: bin masses along a phase scan and Monte Carlo hit counting.

Same contracts as ``_pykernels``. Built without fp contraction so that the
bin classification matches the numpy fallback exactly.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport erf, erfc, exp, fabs, floor, sqrt, M_PI

cnp.import_array()

cdef double SQRT2 = sqrt(2.0)
cdef double SQRT_2_OVER_PI = sqrt(2.0 / M_PI)


cdef inline double _mass(double x_lo, double x_hi) nogil:
    if x_lo >= 0.0:
        return 0.5 * (erfc(x_lo) - erfc(x_hi))
    if x_hi <= 0.0:
        return 0.5 * (erfc(-x_hi) - erfc(-x_lo))
    return 0.5 * (erf(x_hi) - erf(x_lo))


def interval_mass(mu, double a, double spacing, Py_ssize_t half_n):
    cdef double[::1] mu_v = np.ascontiguousarray(mu, dtype=np.float64)
    cdef Py_ssize_t n = mu_v.shape[0]
    q = np.zeros(n)
    dq = np.zeros(n)
    dq_abs = np.zeros(n)
    cdef double[::1] q_v = q
    cdef double[::1] dq_v = dq
    cdef double[::1] abs_v = dq_abs
    cdef Py_ssize_t i, k
    cdef double m, centre, x_lo, x_hi, g_lo, g_hi, sq, sd, sa
    with nogil:
        for i in range(n):
            m = mu_v[i]
            sq = 0.0
            sd = 0.0
            sa = 0.0
            for k in range(-half_n, half_n + 1):
                centre = k * spacing
                x_lo = SQRT2 * (centre - a - m)
                x_hi = SQRT2 * (centre + a - m)
                sq += _mass(x_lo, x_hi)
                g_lo = SQRT_2_OVER_PI * exp(-x_lo * x_lo)
                g_hi = SQRT_2_OVER_PI * exp(-x_hi * x_hi)
                sd += g_lo - g_hi
                sa += g_lo + g_hi
            q_v[i] = sq
            dq_v[i] = sd
            abs_v[i] = sa
    return q, dq, dq_abs


def count_hits(z, double mu, double sigma, double a, double spacing, Py_ssize_t half_n):
    cdef double[::1] z_v = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t n = z_v.shape[0]
    counts = np.zeros(2 * half_n + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] c_v = counts
    cdef Py_ssize_t i
    cdef long long k
    cdef double p, kf
    with nogil:
        if half_n == 0:
            for i in range(n):
                p = mu + sigma * z_v[i]
                if fabs(p) <= a:
                    c_v[0] += 1
        else:
            for i in range(n):
                p = mu + sigma * z_v[i]
                kf = floor(p / spacing + 0.5)
                if fabs(p - kf * spacing) <= a and fabs(kf) <= half_n:
                    k = <long long>kf
                    c_v[k + half_n] += 1
    return counts
