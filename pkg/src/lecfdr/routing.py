"""Joint threshold calibration for model cascades.

A cascade queries models in a fixed order and accepts the first one whose
uncertainty is at or below its threshold; if none does, it abstains. The
calibration condition is imposed on the system-level counts, so every
feasible threshold vector satisfies ``errors - alpha * accepted <= -1`` on
the calibration records.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels
from .core import (
    ABSTAIN,
    BELOW_MIN,
    FEASIBLE,
    GateOutcome,
    MultiRecord,
    ThresholdDecision,
    as_multi_arrays,
    infeasible,
    margin_value,
    max_errors_table,
)
from .single import calibrate_arrays

# Among coverage-maximizing feasible vectors: fewest calibration errors
# (smallest margin), then the largest threshold at model 1, then model 2, ...
TIE_POLICIES = ("min-margin",)
DEFAULT_TIE_POLICY = "min-margin"
STRATEGIES = ("exact", "coord")
EXACT_CAP = 3


@dataclass(frozen=True)
class IndicatorPair:
    S: int
    Z: int
    credited_model: int | None


def system_indicators(record: MultiRecord, thresholds: Sequence[float]) -> IndicatorPair:
    if len(thresholds) != record.m:
        raise ValueError(f"expected {record.m} thresholds, got {len(thresholds)}")
    for m, ((u, err), lam) in enumerate(zip(record.per_model, thresholds), start=1):
        if u <= lam:
            return IndicatorPair(1, int(err), m)
    return IndicatorPair(0, 0, None)


def check_routing_constraint(
    records: Sequence[MultiRecord], thresholds: Sequence[float], alpha: float, correction: int = 1
) -> tuple[bool, float]:
    s = z = 0
    for r in records:
        ind = system_indicators(r, thresholds)
        s += ind.S
        z += ind.Z
    holds = z - Fraction(alpha) * s <= -correction
    return bool(holds), margin_value(z, s, alpha)


def gate_cascade(decision: ThresholdDecision, u: Sequence[float], err: Sequence[int] | None = None) -> GateOutcome:
    if not decision.feasible:
        return ABSTAIN
    if len(u) != len(decision.thresholds):
        raise ValueError(f"expected {len(decision.thresholds)} scores, got {len(u)}")
    for m, (um, lam) in enumerate(zip(u, decision.thresholds)):
        if um <= lam:
            return GateOutcome(m + 1, None if err is None else int(err[m]))
    return ABSTAIN


def cascade_outcomes(u: np.ndarray, err: np.ndarray, thresholds: Sequence[float] | None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised gate: per-row credited model (0-based, -1 = abstain) and Z."""
    n = u.shape[0]
    credited = np.full(n, -1, dtype=np.int64)
    if thresholds is None:
        return credited, np.zeros(n, dtype=np.int64)
    pending = np.ones(n, dtype=bool)
    for m, lam in enumerate(thresholds):
        hit = pending & (u[:, m] <= lam)
        credited[hit] = m
        pending &= ~hit
    z = np.zeros(n, dtype=np.int64)
    acc = credited >= 0
    z[acc] = err[acc, credited[acc]]
    return credited, z


class _Grid:
    """Per-model ascending candidate values and each record's rank in them."""

    def __init__(self, u: np.ndarray):
        self.values = []
        self.ranks = []
        for m in range(u.shape[1]):
            vals, inv = np.unique(u[:, m], return_inverse=True)
            self.values.append(vals)
            self.ranks.append(inv.ravel().astype(np.int64))

    def value(self, m: int, j: int) -> float:
        return BELOW_MIN if j < 0 else float(self.values[m][j])

    def size(self, m: int) -> int:
        return len(self.values[m])


def _decision(grid, idx, s, z, alpha, method, strategy, m) -> ThresholdDecision:
    thresholds = tuple(grid.value(k, j) for k, j in enumerate(idx))
    info = {"tie_policy": DEFAULT_TIE_POLICY, "strategy": strategy, "n_models": m,
            "candidate_grid": "below_min + distinct observed scores per model"}
    return ThresholdDecision(FEASIBLE, thresholds, int(s), margin_value(z, s, alpha), int(z), method, alpha, info)


def _wrap_single(u, err, alpha, keep, m, method, strategy, correction):
    d = calibrate_arrays(u[:, keep], err[:, keep], alpha, correction)
    if not d.feasible:
        return infeasible(method, alpha, m, strategy=strategy)
    thr = [BELOW_MIN] * m
    thr[keep] = d.thresholds[0]
    info = {"tie_policy": DEFAULT_TIE_POLICY, "strategy": strategy, "n_models": m, "disabled": "all but model %d" % (keep + 1)}
    return ThresholdDecision(FEASIBLE, tuple(thr), d.accepted_on_cal, d.margin, d.errors_on_cal, method, alpha, info)


def _check_policy(tie_policy):
    if tie_policy not in TIE_POLICIES:
        raise ValueError(f"unknown tie policy {tie_policy!r}; choose from {TIE_POLICIES}")


def _exact_search(u, err, alpha, active, correction):
    """Exhaustive coverage maximisation; the last two active models go to the kernel."""
    n, m = u.shape
    grid = _Grid(u)
    emax = max_errors_table(alpha, n, correction)
    act = [k for k in range(m) if active[k]]
    if len(act) == 1:
        return None  # handled by caller
    a, b = act[-2], act[-1]
    outer = act[:-2]
    # records accepted before model a depend only on the outer coordinates
    ranges = [range(grid.size(k) - 1, -2, -1) for k in outer]
    best = None  # (S, Z, idx)
    for prefix in itertools.product(*ranges):
        reach = np.ones(n, dtype=bool)
        base_s = base_z = 0
        for k, j in zip(outer, prefix):
            hit = reach & (grid.ranks[k] <= j)
            base_s += int(hit.sum())
            base_z += int(err[hit, k].sum())
            reach &= ~hit
        ja, jb, s, z = kernels.route_search(
            grid.ranks[a][reach], grid.ranks[b][reach], err[reach, a], err[reach, b],
            grid.size(a), grid.size(b), emax, base_s, base_z,
        )
        if s < 0:
            continue
        if best is None or s > best[0] or (s == best[0] and z < best[1]):
            idx = [-1] * m
            for k, j in zip(outer, prefix):
                idx[k] = j
            idx[a], idx[b] = ja, jb
            best = (s, z, idx)
    return grid, best


def _coordinate_ascent(u, err, alpha, active, correction, max_passes=1000):
    n, m = u.shape
    grid = _Grid(u)
    emax = max_errors_table(alpha, n, correction)
    idx = [-1] * m
    cur = None  # (S, Z) of current point when feasible
    cur_margin = 0.0
    for _ in range(max_passes):
        changed = False
        for k in range(m):
            if not active[k]:
                continue
            # outcome of every record under the other coordinates
            reach = np.ones(n, dtype=bool)
            s_before = z_before = 0
            for q in range(k):
                hit = reach & (grid.ranks[q] <= idx[q])
                s_before += int(hit.sum())
                z_before += int(err[hit, q].sum())
                reach &= ~hit
            down_s = np.zeros(n, dtype=np.int64)
            down_z = np.zeros(n, dtype=np.int64)
            pend = np.ones(n, dtype=bool)
            for q in range(k + 1, m):
                hit = pend & (grid.ranks[q] <= idx[q])
                down_s[hit] = 1
                down_z[hit] = err[hit, q]
                pend &= ~hit
            size = grid.size(k)
            r = grid.ranks[k][reach]
            acc_s = np.concatenate(([0], np.cumsum(np.bincount(r, minlength=size))))
            acc_z = np.concatenate(([0], np.cumsum(np.bincount(r, weights=err[reach, k], minlength=size)))).astype(np.int64)
            # records at model k with rank > j fall through to the later models
            ds = np.bincount(r, weights=down_s[reach], minlength=size)
            dz = np.bincount(r, weights=down_z[reach], minlength=size)
            tail_s = np.concatenate((np.cumsum(ds[::-1])[::-1], [0]))
            tail_z = np.concatenate((np.cumsum(dz[::-1])[::-1], [0]))
            # index t <-> threshold rank j = t - 1
            S = s_before + acc_s + tail_s.astype(np.int64)
            Z = z_before + acc_z + tail_z.astype(np.int64)
            ok = Z <= emax[S]
            if not ok.any():
                if cur is None:
                    # still infeasible: step towards feasibility by lowering the margin
                    margin = Z - alpha * S
                    t = int(np.flatnonzero(margin == margin.min())[-1])
                    if margin[t] < cur_margin:
                        idx[k] = t - 1
                        cur_margin = float(margin[t])
                        changed = True
                continue
            cand = np.flatnonzero(ok)
            order = np.lexsort((-cand, Z[cand], -S[cand]))
            t = int(cand[order[0]])
            s_new, z_new = int(S[t]), int(Z[t])
            if cur is None or s_new > cur[0] or (s_new == cur[0] and z_new < cur[1]):
                idx[k] = t - 1
                cur = (s_new, z_new)
                changed = True
        if not changed:
            break
    if cur is None:
        return grid, None
    return grid, (cur[0], cur[1], idx)


def calibrate_multi_arrays(u, err, alpha, strategy="exact", tie_policy=DEFAULT_TIE_POLICY,
                           disabled=(), exact_cap=EXACT_CAP, correction=1, method="lec-multi"):
    _check_policy(tie_policy)
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    n = u.shape[0]
    m = u.shape[1] if n else 0
    if n == 0:
        return infeasible(method, alpha, max(m, 1), strategy=strategy)
    active = [k not in set(disabled) for k in range(m)]
    act = [k for k in range(m) if active[k]]
    if strategy == "exact" and len(act) > exact_cap:
        raise ValueError(
            f"exact search over {len(act)} models exceeds the cap of {exact_cap}; use strategy='coord'"
        )
    if not act:
        return infeasible(method, alpha, m, strategy=strategy)
    if len(act) == 1:
        return _wrap_single(u, err, alpha, act[0], m, method, strategy, correction)
    if strategy == "exact":
        grid, best = _exact_search(u, err, alpha, active, correction)
    else:
        grid, best = _coordinate_ascent(u, err, alpha, active, correction)
    if best is None:
        return infeasible(method, alpha, m, strategy=strategy)
    s, z, idx = best
    return _decision(grid, idx, s, z, alpha, method, strategy, m)


def calibrate_routing(records: Sequence[MultiRecord], alpha: float, tie_policy: str = DEFAULT_TIE_POLICY,
                      disabled: Sequence[int] = (), correction: int = 1) -> ThresholdDecision:
    """Coverage-maximising threshold pair for a two-model cascade.

    Searches every pair from ``{BELOW_MIN} + distinct scores`` per model.
    ``disabled`` holds 0-based model indices pinned to ``BELOW_MIN``.
    """
    u, err = as_multi_arrays(records)
    if len(records) and u.shape[1] != 2:
        raise ValueError(f"two-model routing needs M=2, got M={u.shape[1]}")
    return calibrate_multi_arrays(u, err, alpha, "exact", tie_policy, disabled, correction=correction,
                                  method="lec-route")


def calibrate_multi(records: Sequence[MultiRecord], alpha: float, strategy: str = "exact",
                    tie_policy: str = DEFAULT_TIE_POLICY, disabled: Sequence[int] = (),
                    exact_cap: int = EXACT_CAP) -> ThresholdDecision:
    """Coverage-maximising thresholds for an M-model cascade.

    ``strategy='exact'`` enumerates the full candidate grid (at most
    ``exact_cap`` models). ``strategy='coord'`` runs coordinate ascent from
    the all-disabled point; its output is always feasible but may cover
    fewer calibration records than the exact optimum.
    """
    u, err = as_multi_arrays(records)
    return calibrate_multi_arrays(u, err, alpha, strategy, tie_policy, disabled, exact_cap)


def grid_scan_arrays(u, err, alpha, correction=1) -> ThresholdDecision:
    n = u.shape[0]
    if n == 0:
        return infeasible("lec-route-grid", alpha, 2)
    grid = _Grid(u)
    emax = max_errors_table(alpha, n, correction)
    ra, rb = grid.ranks
    na, nb = grid.size(0), grid.size(1)
    for ja in range(na - 1, -2, -1):
        acc = ra <= ja
        s_a = int(acc.sum())
        z_a = int(err[acc, 0].sum())
        routed = ~acc
        cs = np.concatenate(([0], np.cumsum(np.bincount(rb[routed], minlength=nb))))
        cz = np.concatenate(([0], np.cumsum(np.bincount(rb[routed], weights=err[routed, 1], minlength=nb)))).astype(np.int64)
        S = s_a + cs
        Z = z_a + cz
        ok = np.flatnonzero(Z <= emax[S])
        if len(ok):
            t = int(ok[-1])
            d = _decision(grid, [ja, t - 1], S[t], Z[t], alpha, "lec-route-grid", "grid-scan", 2)
            d.info["tie_policy"] = "first feasible, lambda_a then lambda_b descending"
            return d
    return infeasible("lec-route-grid", alpha, 2)


def grid_scan_routing(records: Sequence[MultiRecord], alpha: float) -> ThresholdDecision:
    """First feasible pair in a lexicographic scan (model-1 threshold descending, then model 2).

    This is the plain grid-search alternative to coverage maximisation; its
    calibration coverage never exceeds :func:`calibrate_routing`'s.
    """
    u, err = as_multi_arrays(records)
    return grid_scan_arrays(u, err, alpha)
