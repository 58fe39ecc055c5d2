"""Repeated calibration/test splits, test-time metrics and method comparison."""

from __future__ import annotations

import math
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .coin import calibrate_coin_arrays, coin_feasible_mask
from .core import MultiRecord, Record, ThresholdDecision, as_arrays, as_multi_arrays
from .routing import calibrate_multi_arrays, cascade_outcomes, grid_scan_arrays
from .single import _prefix_from_arrays, calibrate_arrays, feasible_mask

SINGLE_METHODS = ("lec", "coin-cp", "coin-hfd")
MULTI_METHODS = ("lec-route", "lec-route-grid", "lec-multi")
METHODS = SINGLE_METHODS + MULTI_METHODS


def split_seed(seed: int, split_index: int) -> int:
    """Sub-seed for one split: numpy ``SeedSequence`` keyed by ``(seed, split_index)``.

    ``SeedSequence`` hashing is fixed by numpy's stability policy, so the
    same pair maps to the same 64-bit value across releases.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(split_index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def split(records: Sequence, ratio: float, seed: int) -> tuple[list, list]:
    """Seeded uniform permutation; the first ``floor(ratio * n)`` go to calibration."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    n = len(records)
    if n < 2:
        raise ValueError("need at least two records to split")
    perm = _permutation(n, seed)
    k = int(math.floor(ratio * n))
    return [records[i] for i in perm[:k]], [records[i] for i in perm[k:]]


def _permutation(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).permutation(n)


@dataclass(frozen=True)
class MethodSpec:
    """A method id plus, for single-model methods on multi-model data, the model used."""

    name: str
    model: int = 0  # 0-based

    @classmethod
    def parse(cls, text: str) -> "MethodSpec":
        name, _, idx = text.partition(":")
        name = name.strip().lower()
        if name not in METHODS:
            raise ValueError(f"unknown method {text!r}; choose from {METHODS}")
        if idx:
            if name not in SINGLE_METHODS:
                raise ValueError(f"model selector only applies to {SINGLE_METHODS}")
            return cls(name, int(idx) - 1)
        return cls(name)

    @property
    def label(self) -> str:
        return self.name if self.model == 0 or self.name not in SINGLE_METHODS else f"{self.name}:{self.model + 1}"

    @property
    def multi(self) -> bool:
        return self.name in MULTI_METHODS


@dataclass
class SplitReport:
    split_index: int
    method: str
    alpha: float
    feasible: bool
    test_fdr: float | None
    power: float | None
    accepted_total: int
    accepted_correct: int
    abstained: int
    n_test: int
    test_correct: int
    thresholds: tuple | None
    sub_seed: int
    credited: tuple = ()


@dataclass
class EvalSummary:
    method: str
    alpha: float
    n_splits: int
    fdr_mean: float | None
    fdr_std: float | None
    fdr_undefined: int
    fdr_mean_zero_filled: float
    power_mean: float | None
    power_std: float | None
    power_undefined: int
    power_mean_zero_filled: float
    power_std_zero_filled: float
    feasibility_rate: float
    accepted_correct_mean: float
    accepted_correct_std: float
    accepted_total_mean: float

    def as_dict(self) -> dict:
        return asdict(self)


def calibrate_method(spec: MethodSpec, u: np.ndarray, err: np.ndarray, alpha: float, delta: float = 0.05,
                     strategy: str = "exact") -> ThresholdDecision:
    """Calibrate one method on ``(n, M)`` arrays."""
    if spec.name == "lec":
        return calibrate_arrays(u[:, spec.model], err[:, spec.model], alpha)
    if spec.name in ("coin-cp", "coin-hfd"):
        return calibrate_coin_arrays(u[:, spec.model], err[:, spec.model], alpha, delta, spec.name[5:])
    if spec.name == "lec-route":
        if u.shape[1] != 2:
            raise ValueError("lec-route needs exactly two models; use lec-multi")
        return calibrate_multi_arrays(u, err, alpha, "exact", method="lec-route")
    if spec.name == "lec-route-grid":
        return grid_scan_arrays(u, err, alpha)
    return calibrate_multi_arrays(u, err, alpha, strategy)


def _std(x) -> float | None:
    return float(np.std(x)) if len(x) else None


def _mean(x) -> float | None:
    return float(np.mean(x)) if len(x) else None


def test_metrics(u: np.ndarray, err: np.ndarray, decision: ThresholdDecision, spec: MethodSpec | None = None) -> dict:
    """Test-time FDR, power and acceptance counts for a calibrated decision.

    For single-model methods the correct-answer pool is the chosen model's
    correct answers. For cascades it is the rows where at least one model is
    correct. FDR (power) is ``None`` when nothing is accepted (no correct
    answers exist).
    """
    if u.ndim == 1:
        u = u[:, None]
        err = err[:, None]
    n = u.shape[0]
    spec = spec or MethodSpec(decision.method if decision.method in METHODS else "lec")
    if spec.multi:
        credited, z = cascade_outcomes(u, err, decision.thresholds)
        correct_pool = int((err == 0).any(axis=1).sum())
    else:
        col = spec.model
        thr = None if decision.thresholds is None else (decision.thresholds[0],)
        credited, z = cascade_outcomes(u[:, col:col + 1], err[:, col:col + 1], thr)
        credited = np.where(credited >= 0, col, -1)
        correct_pool = int((err[:, col] == 0).sum())
    acc = credited >= 0
    accepted = int(acc.sum())
    errors = int(z.sum())
    acc_correct = accepted - errors
    per_model = tuple(int((credited == m).sum()) for m in range(u.shape[1]))
    return {
        "test_fdr": errors / accepted if accepted else None,
        "power": acc_correct / correct_pool if correct_pool else None,
        "accepted_total": accepted,
        "accepted_correct": acc_correct,
        "abstained": n - accepted,
        "n_test": n,
        "test_correct": correct_pool,
        "credited": per_model,
    }


test_metrics.__test__ = False  # keep pytest from collecting it


def summarize(reports: Sequence[SplitReport], method: str, alpha: float) -> EvalSummary:
    """Aggregate per-split reports; a pure function of the table."""
    fdr = [r.test_fdr for r in reports if r.test_fdr is not None]
    power_feas = [r.power for r in reports if r.feasible and r.power is not None]
    power_zero = [(r.power if r.feasible else 0.0) for r in reports if r.power is not None]
    acc_c = [r.accepted_correct for r in reports]
    return EvalSummary(
        method=method,
        alpha=alpha,
        n_splits=len(reports),
        fdr_mean=_mean(fdr),
        fdr_std=_std(fdr),
        fdr_undefined=len(reports) - len(fdr),
        fdr_mean_zero_filled=float(np.mean([r.test_fdr or 0.0 for r in reports])) if reports else 0.0,
        power_mean=_mean(power_feas),
        power_std=_std(power_feas),
        power_undefined=len(reports) - len(power_feas),
        power_mean_zero_filled=float(np.mean(power_zero)) if power_zero else 0.0,
        power_std_zero_filled=float(np.std(power_zero)) if power_zero else 0.0,
        feasibility_rate=float(np.mean([r.feasible for r in reports])) if reports else 0.0,
        accepted_correct_mean=float(np.mean(acc_c)) if acc_c else 0.0,
        accepted_correct_std=float(np.std(acc_c)) if acc_c else 0.0,
        accepted_total_mean=float(np.mean([r.accepted_total for r in reports])) if reports else 0.0,
    )


def _to_arrays(records) -> tuple[np.ndarray, np.ndarray]:
    if records and isinstance(records[0], MultiRecord):
        return as_multi_arrays(records)
    u, err = as_arrays(records)
    return u[:, None], err[:, None]


def _split_job(args):
    u, err, specs, alphas, ratio, seed, s, delta, strategy = args
    sub = split_seed(seed, s)
    n = u.shape[0]
    perm = _permutation(n, sub)
    k = int(math.floor(ratio * n))
    cal, test = perm[:k], perm[k:]
    out = []
    for spec in specs:
        for a in alphas:
            d = calibrate_method(spec, u[cal], err[cal], a, delta, strategy)
            m = test_metrics(u[test], err[test], d, spec)
            out.append(SplitReport(s, spec.label, a, d.feasible, m["test_fdr"], m["power"], m["accepted_total"],
                                   m["accepted_correct"], m["abstained"], m["n_test"], m["test_correct"],
                                   d.thresholds, sub, m["credited"]))
    return out


def _run(jobs, workers):
    """Map split jobs serially, over a new process pool, or over a given executor."""
    if isinstance(workers, Executor):
        return list(workers.map(_split_job, jobs))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(_split_job, jobs))
    return [_split_job(j) for j in jobs]


def compare_methods(records, methods: Sequence[str], alphas: Sequence[float], n_splits: int = 100,
                    ratio: float = 0.5, seed: int = 0, delta: float = 0.05, strategy: str = "exact",
                    workers: int = 1) -> tuple[list[EvalSummary], list[SplitReport]]:
    """Evaluate every (method, alpha) on the same ``n_splits`` random splits.

    Returns one summary per (method, alpha), in input order, and the full
    per-split table sorted by method, alpha and split index. ``workers`` is a
    process count or an existing ``concurrent.futures.Executor``; results do
    not depend on it.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    if n_splits < 1:
        raise ValueError("n_splits must be at least 1")
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {a}")
    specs = [MethodSpec.parse(m) for m in methods]
    u, err = _to_arrays(list(records))
    if u.shape[0] < 2:
        raise ValueError("need at least two records to split")
    for spec in specs:
        if spec.model >= u.shape[1]:
            raise ValueError(f"method {spec.label} refers to model {spec.model + 1} but data has {u.shape[1]}")
        if spec.multi and u.shape[1] < 2:
            raise ValueError(f"method {spec.name} needs multi-model records")
    jobs = [(u, err, specs, list(alphas), ratio, seed, s, delta, strategy) for s in range(n_splits)]
    chunks = _run(jobs, workers)
    by_key: dict[tuple[str, float], list[SplitReport]] = {}
    for chunk in chunks:
        for r in chunk:
            by_key.setdefault((r.method, r.alpha), []).append(r)
    summaries, table = [], []
    for spec in specs:
        for a in alphas:
            reps = sorted(by_key[(spec.label, a)], key=lambda r: r.split_index)
            summaries.append(summarize(reps, spec.label, a))
            table.extend(reps)
    return summaries, table


def repeated_eval(records, method: str, alpha: float, n_splits: int = 100, ratio: float = 0.5, seed: int = 0,
                  delta: float = 0.05, strategy: str = "exact", workers: int = 1) -> tuple[EvalSummary, list[SplitReport]]:
    summaries, table = compare_methods(records, [method], [alpha], n_splits, ratio, seed, delta, strategy, workers)
    return summaries[0], table


def min_feasible_accepted(records: Sequence[Record], alpha: float, method: str = "lec", delta: float = 0.05) -> int | None:
    """Smallest calibration acceptance count at which ``method`` meets its criterion, or ``None``."""
    u, err = as_arrays(records)
    if method == "lec":
        pm = _prefix_from_arrays(u, err, alpha)
        ks, mask = pm.cum_counts, feasible_mask(pm)
    elif method in ("coin-cp", "coin-hfd"):
        _, ks, _, mask = coin_feasible_mask(u, err, alpha, delta, method[5:])
    else:
        raise ValueError(f"unknown single-model method {method!r}")
    ok = np.flatnonzero(mask)
    return int(ks[ok[0]]) if len(ok) else None
