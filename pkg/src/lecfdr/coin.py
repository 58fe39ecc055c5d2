"""Upper-confidence-bound baselines (Clopper-Pearson and Hoeffding).

Each calibrates the largest threshold whose ``1 - delta`` upper confidence
bound on the selected-set error rate is at most ``alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .core import FEASIBLE, Record, ThresholdDecision, as_arrays, infeasible, margin_value
from .single import group_scores

BOUNDS = ("cp", "hfd")


@dataclass(frozen=True)
class UcbQuery:
    err_count: int
    selected: int
    delta: float = 0.05

    def __post_init__(self):
        if self.selected <= 0:
            raise ValueError("upper confidence bound is undefined on an empty selection")
        if not 0 <= self.err_count <= self.selected:
            raise ValueError(f"err_count must lie in [0, selected], got {self.err_count}/{self.selected}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


def reg_incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)`` (absolute error below 1e-12)."""
    return kernels.reg_incomplete_beta(float(a), float(b), float(x))


def binom_cdf(k: int, n: int, p: float) -> float:
    """``Pr[Binomial(n, p) <= k]``."""
    if k < 0:
        return 0.0
    if k >= n:
        return 1.0
    if p <= 0.0:
        return 1.0
    if p >= 1.0:
        return 0.0
    return reg_incomplete_beta(n - k, k + 1, 1.0 - p)


def hoeffding_ucb(q: UcbQuery) -> float:
    rate = q.err_count / q.selected
    return min(1.0, rate + math.sqrt(math.log(1.0 / q.delta) / (2.0 * q.selected)))


def clopper_pearson_ucb(q: UcbQuery, tol: float = 1e-10, max_iter: int = 200) -> float:
    """One-sided exact upper bound: the ``p`` with ``Pr[Bin(selected, p) <= err_count] = delta``."""
    e, n, d = q.err_count, q.selected, q.delta
    if e == n:
        return 1.0
    if e == 0:
        return -math.expm1(math.log(d) / n)
    lo, hi = e / n, 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        # the tail probability falls as p grows
        if binom_cdf(e, n, mid) > d:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def ucb(err_count: int, selected: int, delta: float, bound: str) -> float:
    q = UcbQuery(int(err_count), int(selected), delta)
    if bound == "cp":
        return clopper_pearson_ucb(q)
    if bound == "hfd":
        return hoeffding_ucb(q)
    raise ValueError(f"unknown bound {bound!r}; choose from {BOUNDS}")


def _below_alpha(e: int, k: int, alpha: float, delta: float, bound: str) -> bool:
    if bound == "hfd":
        return hoeffding_ucb(UcbQuery(e, k, delta)) <= alpha
    # The CP bound is at most alpha exactly when the binomial tail at alpha is
    # at most delta, so one tail evaluation replaces the bisection.
    if e == k:
        return False
    return binom_cdf(e, k, alpha) <= delta


def coin_feasible_mask(u: np.ndarray, err: np.ndarray, alpha: float, delta: float, bound: str):
    """Distinct scores, cumulative counts/errors and per-candidate feasibility."""
    if bound not in BOUNDS:
        raise ValueError(f"unknown bound {bound!r}; choose from {BOUNDS}")
    values, counts, errors = group_scores(u, err)
    ks = np.cumsum(counts)
    es = np.cumsum(errors)
    mask = np.fromiter(
        (_below_alpha(int(e), int(k), alpha, delta, bound) for e, k in zip(es, ks)),
        dtype=bool, count=len(values),
    )
    return values, ks, es, mask


def calibrate_coin_arrays(u, err, alpha, delta=0.05, bound="cp") -> ThresholdDecision:
    method = "coin-" + bound
    if len(u) == 0:
        return infeasible(method, alpha, delta=delta)
    values, ks, es, mask = coin_feasible_mask(u, err, alpha, delta, bound)
    ok = np.flatnonzero(mask)
    if len(ok) == 0:
        return infeasible(method, alpha, delta=delta)
    j = ok[-1]
    k, e = int(ks[j]), int(es[j])
    return ThresholdDecision(
        FEASIBLE, (float(values[j]),), k, margin_value(e, k, alpha), e, method, alpha,
        {"delta": delta, "ucb": ucb(e, k, delta, bound), "n_models": 1},
    )


def calibrate_coin(records: Sequence[Record], alpha: float, delta: float = 0.05, bound: str = "cp") -> ThresholdDecision:
    """Largest distinct-score threshold whose selected-set UCB is at most ``alpha``.

    The UCB is not monotone in the threshold, so every candidate is checked.
    ``margin`` in the result is reported for comparison with LEC only.
    """
    u, err = as_arrays(records)
    return calibrate_coin_arrays(u, err, alpha, delta, bound)
