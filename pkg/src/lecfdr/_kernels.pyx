# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: cascade pair search and the regularized incomplete beta.

Mirrors ``_fallback.py`` function for function.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, lgamma, fabs, M_PI

cnp.import_array()

cdef double _HALF_LOG_2PI = 0.5 * log(2.0 * M_PI)
cdef double _CF_EPS = 1e-16
cdef double _CF_TINY = 1e-300
cdef int _CF_MAXIT = 100000


cdef inline double _stirling_tail(double z) nogil:
    cdef double z2 = 1.0 / (z * z)
    return (
        1.0 / 12.0
        - z2 * (1.0 / 360.0
        - z2 * (1.0 / 1260.0
        - z2 * (1.0 / 1680.0
        - z2 * (1.0 / 1188.0
        - z2 * (691.0 / 360360.0
        - z2 * (1.0 / 156.0))))))
    ) / z


cdef double _log_prefactor(double a, double b, double x) nogil:
    cdef double y = 1.0 - x
    cdef double s, x0, y0, t, small, big, ratio
    if a >= 10.0 and b >= 10.0:
        s = a + b
        x0 = a / s
        y0 = b / s
        t = a * log1p((x - x0) / x0) + b * log1p((y - y0) / y0)
        return (t + 0.5 * log(a * b / s) - _HALF_LOG_2PI
                + _stirling_tail(s) - _stirling_tail(a) - _stirling_tail(b))
    if b >= 10.0 or a >= 10.0:
        if b >= 10.0:
            small = a
            big = b
        else:
            small = b
            big = a
        s = small + big
        ratio = (big - 0.5) * log1p(small / big) + small * log(s) - small
        ratio += _stirling_tail(s) - _stirling_tail(big)
        return ratio - lgamma(small) + a * log(x) + b * log1p(-x)
    return lgamma(a + b) - lgamma(a) - lgamma(b) + a * log(x) + b * log1p(-x)


cdef int _betacf(double a, double b, double x, double* out) nogil:
    cdef double qab = a + b, qap = a + 1.0, qam = a - 1.0
    cdef double c = 1.0, d, h, aa, delta
    cdef int m, m2
    d = 1.0 - qab * x / qap
    if fabs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if fabs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if fabs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if fabs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if fabs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < _CF_EPS:
            out[0] = h
            return 0
    return -1


def reg_incomplete_beta(double a, double b, double x):
    cdef double cf
    if not (a > 0.0 and b > 0.0):
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    if x < (a + 1.0) / (a + b + 2.0):
        if _betacf(a, b, x, &cf) != 0:
            raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")
        return exp(_log_prefactor(a, b, x)) * cf / a
    if _betacf(b, a, 1.0 - x, &cf) != 0:
        raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")
    return 1.0 - exp(_log_prefactor(b, a, 1.0 - x)) * cf / b


def route_search(ra, rb, err_a, err_b, Py_ssize_t n_a, Py_ssize_t n_b, emax,
                 long long base_s=0, long long base_z=0):
    cdef const cnp.int64_t[::1] ra_v = np.ascontiguousarray(ra, dtype=np.int64)
    cdef const cnp.int64_t[::1] rb_v = np.ascontiguousarray(rb, dtype=np.int64)
    cdef const cnp.int64_t[::1] ea_v = np.ascontiguousarray(err_a, dtype=np.int64)
    cdef const cnp.int64_t[::1] eb_v = np.ascontiguousarray(err_b, dtype=np.int64)
    cdef const cnp.int64_t[::1] emax_v = np.ascontiguousarray(emax, dtype=np.int64)
    cdef Py_ssize_t n = ra_v.shape[0]
    cdef Py_ssize_t n_emax = emax_v.shape[0]

    cdef cnp.int64_t[::1] cnt_b = np.zeros(n_b, dtype=np.int64)
    cdef cnp.int64_t[::1] errb_by = np.zeros(n_b, dtype=np.int64)
    cdef cnp.int64_t[::1] start = np.zeros(n_a + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] order = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] fill

    cdef Py_ssize_t i, j, p, ja, jb
    cdef long long s_a = 0, z_a = 0, cs, cz, S, Z
    cdef long long best_ja = -1, best_jb = -1, best_s = -1, best_z = -1

    # counting sort of records by a-rank
    for i in range(n):
        start[ra_v[i] + 1] += 1
        s_a += 1
        z_a += ea_v[i]
    for j in range(n_a):
        start[j + 1] += start[j]
    fill = np.asarray(start)[:n_a].copy()
    for i in range(n):
        j = ra_v[i]
        order[fill[j]] = i
        fill[j] += 1

    with nogil:
        ja = n_a - 1
        while ja >= -1:
            cs = 0
            cz = 0
            jb = -1
            while jb < n_b:
                if jb >= 0:
                    cs += cnt_b[jb]
                    cz += errb_by[jb]
                S = base_s + s_a + cs
                Z = base_z + z_a + cz
                if S < n_emax and Z <= emax_v[S]:
                    if S > best_s or (S == best_s and (Z < best_z or (Z == best_z and ja == best_ja))):
                        best_ja = ja
                        best_jb = jb
                        best_s = S
                        best_z = Z
                jb += 1
            if ja >= 0:
                for p in range(start[ja], start[ja + 1]):
                    i = order[p]
                    cnt_b[rb_v[i]] += 1
                    errb_by[rb_v[i]] += eb_v[i]
                    s_a -= 1
                    z_a -= ea_v[i]
            ja -= 1
    return (best_ja, best_jb, best_s, best_z)
