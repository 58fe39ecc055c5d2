"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Both modules expose the same functions with the same results; the package
picks one at import time (see ``kernels.py``).
"""

from __future__ import annotations

import math

import numpy as np

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAXIT = 100000


def _stirling_tail(z: float) -> float:
    # lgamma(z) minus its Stirling main part; z >= 10
    z2 = 1.0 / (z * z)
    return (
        1.0 / 12.0
        - z2 * (1.0 / 360.0
        - z2 * (1.0 / 1260.0
        - z2 * (1.0 / 1680.0
        - z2 * (1.0 / 1188.0
        - z2 * (691.0 / 360360.0
        - z2 * (1.0 / 156.0))))))
    ) / z


def _log_prefactor(a: float, b: float, x: float) -> float:
    """log of x**a (1-x)**b / B(a, b) without large cancellations."""
    y = 1.0 - x
    if a >= 10.0 and b >= 10.0:
        s = a + b
        x0 = a / s
        y0 = b / s
        t = a * math.log1p((x - x0) / x0) + b * math.log1p((y - y0) / y0)
        return (
            t
            + 0.5 * math.log(a * b / s)
            - _HALF_LOG_2PI
            + _stirling_tail(s) - _stirling_tail(a) - _stirling_tail(b)
        )
    if b >= 10.0 or a >= 10.0:
        small, big = (a, b) if b >= 10.0 else (b, a)
        # lgamma(small + big) - lgamma(big)
        s = small + big
        ratio = (big - 0.5) * math.log1p(small / big) + small * math.log(s) - small
        ratio += _stirling_tail(s) - _stirling_tail(big)
        return ratio - math.lgamma(small) + a * math.log(x) + b * math.log1p(-x)
    return (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def reg_incomplete_beta(a: float, b: float, x: float) -> float:
    if not (a > 0.0 and b > 0.0):
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(_log_prefactor(a, b, x)) * _betacf(a, b, x) / a
    return 1.0 - math.exp(_log_prefactor(b, a, 1.0 - x)) * _betacf(b, a, 1.0 - x) / b


def route_search(ra, rb, err_a, err_b, n_a, n_b, emax, base_s=0, base_z=0):
    """Best threshold pair for a two-stage cascade over rank-coded records.

    ``ra``/``rb`` are each record's index into the ascending candidate grids of
    sizes ``n_a``/``n_b``; index ``-1`` stands for the below-minimum sentinel.
    ``emax[k]`` is the largest error count allowed with ``k`` selections and
    ``base_s``/``base_z`` are selections and errors already fixed upstream.

    Returns ``(ja, jb, S, Z)``; ``S == -1`` when no pair is feasible. Ties on
    coverage go to fewer errors, then larger ``ja``, then larger ``jb``.
    """
    ra = np.asarray(ra, dtype=np.int64)
    rb = np.asarray(rb, dtype=np.int64)
    err_a = np.asarray(err_a, dtype=np.int64)
    err_b = np.asarray(err_b, dtype=np.int64)
    emax = np.asarray(emax, dtype=np.int64)

    cnt_a = np.bincount(ra, minlength=n_a)
    erra_by = np.bincount(ra, weights=err_a, minlength=n_a).astype(np.int64)
    # routed records grouped by b-rank, filled as ja decreases
    cnt_b = np.zeros(n_b, dtype=np.int64)
    errb_by = np.zeros(n_b, dtype=np.int64)
    order = np.argsort(ra, kind="stable")
    ra_sorted = ra[order]
    rb_sorted = rb[order]
    eb_sorted = err_b[order]
    bounds = np.searchsorted(ra_sorted, np.arange(n_a + 1), side="left")

    s_a = int(cnt_a.sum())
    z_a = int(erra_by.sum())
    best = (-1, -1, -1, -1)  # ja, jb, S, Z
    jb_idx = np.arange(-1, n_b)
    for ja in range(n_a - 1, -2, -1):
        cs = np.concatenate(([0], np.cumsum(cnt_b)))
        cz = np.concatenate(([0], np.cumsum(errb_by)))
        S = base_s + s_a + cs
        Z = base_z + z_a + cz
        ok = Z <= emax[S]
        if ok.any():
            Sf = S[ok]
            Zf = Z[ok]
            jf = jb_idx[ok]
            top = Sf.max()
            sel = Sf == top
            zmin = Zf[sel].min()
            sel &= Zf == zmin
            jbest = int(jf[sel].max())
            bS, bZ = best[2], best[3]
            if top > bS or (top == bS and zmin < bZ):
                best = (ja, jbest, int(top), int(zmin))
        if ja >= 0:
            lo, hi = bounds[ja], bounds[ja + 1]
            if hi > lo:
                np.add.at(cnt_b, rb_sorted[lo:hi], 1)
                np.add.at(errb_by, rb_sorted[lo:hi], eb_sorted[lo:hi])
                s_a -= int(cnt_a[ja])
                z_a -= int(erra_by[ja])
    return best
