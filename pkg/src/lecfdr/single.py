"""Single-model threshold calibration and the test-time gate."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import (
    ABSTAIN,
    FEASIBLE,
    GateOutcome,
    Record,
    ThresholdDecision,
    as_arrays,
    infeasible,
    margin_value,
    max_errors_table,
)


@dataclass(frozen=True)
class PrefixMargin:
    """Constraint sums at every distinct uncertainty value.

    ``cum_margin[k]`` is ``errors - alpha * count`` over all records whose
    score is at most ``sorted_u[k]``; tied scores form one group.
    """

    sorted_u: np.ndarray
    cum_margin: np.ndarray
    group_counts: np.ndarray
    cum_counts: np.ndarray
    cum_errors: np.ndarray
    alpha: float

    def __len__(self):
        return len(self.sorted_u)


def group_scores(u: np.ndarray, err: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distinct sorted scores with per-group record and error counts."""
    values, inverse, counts = np.unique(u, return_inverse=True, return_counts=True)
    errors = np.bincount(inverse.ravel(), weights=err, minlength=len(values)).astype(np.int64)
    return values, counts.astype(np.int64), errors


def prefix_margins(records: Sequence[Record], alpha: float) -> PrefixMargin:
    u, err = as_arrays(records)
    return _prefix_from_arrays(u, err, alpha)


def _prefix_from_arrays(u, err, alpha) -> PrefixMargin:
    values, counts, errors = group_scores(u, err)
    cum_counts = np.cumsum(counts)
    cum_errors = np.cumsum(errors)
    cum_margin = cum_errors - alpha * cum_counts
    return PrefixMargin(values, cum_margin, counts, cum_counts, cum_errors, alpha)


def check_constraint(records: Sequence[Record], lam: float, alpha: float, correction: int = 1) -> tuple[bool, float]:
    """Evaluate the calibration condition at threshold ``lam``.

    Returns ``(holds, margin)`` where margin is the sum of ``err - alpha``
    over records with ``u <= lam``. The comparison against ``-correction``
    is done on exact counts.
    """
    k = sum(1 for r in records if r.u <= lam)
    e = sum(r.err for r in records if r.u <= lam)
    holds = e - Fraction(alpha) * k <= -correction
    return bool(holds), margin_value(e, k, alpha)


def feasible_mask(pm: PrefixMargin, correction: int = 1) -> np.ndarray:
    if len(pm) == 0:
        return np.zeros(0, dtype=bool)
    emax = max_errors_table(pm.alpha, int(pm.cum_counts[-1]), correction)
    return pm.cum_errors <= emax[pm.cum_counts]


def calibrate_arrays(u: np.ndarray, err: np.ndarray, alpha: float, correction: int = 1) -> ThresholdDecision:
    """Array entry point used by the harness and Monte Carlo loops."""
    if len(u) == 0:
        return infeasible("lec", alpha)
    pm = _prefix_from_arrays(u, err, alpha)
    ok = np.flatnonzero(feasible_mask(pm, correction))
    if len(ok) == 0:
        return infeasible("lec", alpha)
    k = ok[-1]
    acc = int(pm.cum_counts[k])
    e = int(pm.cum_errors[k])
    return ThresholdDecision(
        FEASIBLE, (float(pm.sorted_u[k]),), acc, margin_value(e, acc, alpha), e, "lec", alpha
    )


def calibrate_single(records: Sequence[Record], alpha: float, correction: int = 1) -> ThresholdDecision:
    """Largest threshold whose calibration constraint sum is at most ``-1``.

    Candidates are the distinct observed scores. Returns an infeasible
    decision when no candidate qualifies (accepting nothing never does).
    ``correction`` exists for mutation testing; leave it at 1.
    """
    u, err = as_arrays(records)
    return calibrate_arrays(u, err, alpha, correction)


def min_feasible_alpha(records: Sequence[Record]) -> float | None:
    """Smallest float ``alpha`` at which :func:`calibrate_single` is feasible.

    Rearranging the condition gives ``alpha >= (E_k + 1) / k`` at each group
    boundary; the minimum over boundaries is rounded up to the nearest float
    that satisfies it exactly.
    """
    if not records:
        return None
    u, err = as_arrays(records)
    _, counts, errors = group_scores(u, err)
    best: Fraction | None = None
    for k, e in zip(np.cumsum(counts).tolist(), np.cumsum(errors).tolist()):
        r = Fraction(e + 1, k)
        if best is None or r < best:
            best = r
    if best is None or best >= 1:
        return None
    a = float(best)
    if Fraction(a) < best:
        a = math.nextafter(a, 1.0)
    return a


def gate_single(decision: ThresholdDecision, u: float, err: int | None = None) -> GateOutcome:
    if decision.feasible and u <= decision.thresholds[0]:
        return GateOutcome(1, err)
    return ABSTAIN
