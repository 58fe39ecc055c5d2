"""Shared record types, validation and ordering helpers."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np

# Threshold that selects nothing at a model (strictly below every finite score).
BELOW_MIN = -math.inf

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"


class ValidationError(ValueError):
    """Raised when input rows break the record invariants.

    ``problems`` holds ``(row, reason)`` pairs, one per bad row, with 1-based
    row numbers.
    """

    def __init__(self, problems: list[tuple[int, str]]):
        self.problems = problems
        lines = [f"row {i}: {reason}" for i, reason in problems]
        super().__init__("; ".join(lines))


@dataclass(frozen=True)
class Record:
    id: Any
    u: float
    err: int


@dataclass(frozen=True)
class MultiRecord:
    id: Any
    per_model: tuple[tuple[float, int], ...]

    @property
    def m(self) -> int:
        return len(self.per_model)

    def project(self, model: int) -> Record:
        u, err = self.per_model[model]
        return Record(self.id, u, err)


@dataclass(frozen=True)
class RiskSpec:
    alpha: float
    delta: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class ThresholdDecision:
    """Outcome of a calibration.

    ``thresholds`` has one entry per model (``BELOW_MIN`` disables a model)
    and is ``None`` when the level is infeasible. ``margin`` is the empirical
    constraint sum ``errors - alpha * accepted`` at the chosen thresholds.
    """

    status: str
    thresholds: tuple[float, ...] | None
    accepted_on_cal: int = 0
    margin: float | None = None
    errors_on_cal: int = 0
    method: str = "lec"
    alpha: float | None = None
    info: dict = field(default_factory=dict, compare=False)

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    @property
    def threshold(self) -> float:
        if self.thresholds is None:
            raise ValueError("infeasible decision has no threshold")
        return self.thresholds[0]

    # routing vocabulary
    @property
    def coverage_on_cal(self) -> int:
        return self.accepted_on_cal


def infeasible(method: str = "lec", alpha: float | None = None, m: int = 1, **info) -> ThresholdDecision:
    info.setdefault("n_models", m)
    return ThresholdDecision(INFEASIBLE, None, 0, None, 0, method, alpha, info)


@dataclass(frozen=True)
class GateOutcome:
    """``model`` is the 1-based accepted model index, ``None`` for abstain."""

    model: int | None
    err_if_accepted: int | None = None

    @property
    def accepted(self) -> bool:
        return self.model is not None

    @property
    def S(self) -> int:
        return int(self.model is not None)

    @property
    def Z(self) -> int:
        return int(self.model is not None and self.err_if_accepted == 1)


ABSTAIN = GateOutcome(None, None)


def _check_pair(u: Any, err: Any) -> tuple[float, int] | str:
    try:
        u = float(u)
    except (TypeError, ValueError):
        return "non-numeric uncertainty"
    if not math.isfinite(u):
        return "non-finite uncertainty"
    if isinstance(err, bool):
        err = int(err)
    try:
        e = float(err)
    except (TypeError, ValueError):
        return "error label not binary"
    if e not in (0.0, 1.0):
        return "error label not binary"
    return u, int(e)


def _fields(row: Any) -> tuple[Any, Any, Any]:
    if isinstance(row, Record):
        return row.id, row.u, row.err
    if isinstance(row, dict):
        return row.get("id"), row.get("u", row.get("uncertainty")), row.get("err", row.get("error"))
    rid, u, err = row
    return rid, u, err


def validate_records(raw: Iterable[Any]) -> list[Record]:
    """Check rows against the record invariants and return them as ``Record``.

    Rows may be ``Record`` objects, ``(id, u, err)`` tuples or dicts with
    ``id``/``u``/``err`` keys. Every bad row is reported, not just the first.
    """
    out: list[Record] = []
    problems: list[tuple[int, str]] = []
    for i, row in enumerate(raw, start=1):
        rid, u, err = _fields(row)
        checked = _check_pair(u, err)
        if isinstance(checked, str):
            problems.append((i, checked))
        else:
            out.append(Record(rid, checked[0], checked[1]))
    if problems:
        raise ValidationError(problems)
    return out


def validate_multi(raw: Iterable[Any]) -> list[MultiRecord]:
    """Validate multi-model rows; all rows must carry the same number of models."""
    out: list[MultiRecord] = []
    problems: list[tuple[int, str]] = []
    m_seen = None
    for i, row in enumerate(raw, start=1):
        if isinstance(row, MultiRecord):
            rid, pairs = row.id, row.per_model
        else:
            rid, pairs = row
        pairs = list(pairs)
        if not pairs:
            problems.append((i, "no models in row"))
            continue
        if m_seen is None:
            m_seen = len(pairs)
        elif len(pairs) != m_seen:
            problems.append((i, f"expected {m_seen} models, got {len(pairs)}"))
            continue
        clean = []
        for m, (u, err) in enumerate(pairs, start=1):
            checked = _check_pair(u, err)
            if isinstance(checked, str):
                problems.append((i, f"model {m}: {checked}"))
                break
            clean.append(checked)
        else:
            out.append(MultiRecord(rid, tuple(clean)))
    if problems:
        raise ValidationError(problems)
    return out


def sort_by_uncertainty(records: Sequence[Record]) -> list[Record]:
    # sorted() is stable, so tied scores keep input order
    return sorted(records, key=lambda r: r.u)


def as_arrays(records: Sequence[Record]) -> tuple[np.ndarray, np.ndarray]:
    u = np.fromiter((r.u for r in records), dtype=float, count=len(records))
    err = np.fromiter((r.err for r in records), dtype=np.int64, count=len(records))
    return u, err


def as_multi_arrays(records: Sequence[MultiRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(u, err)`` arrays of shape ``(n, M)``."""
    if not records:
        return np.empty((0, 0)), np.empty((0, 0), dtype=np.int64)
    u = np.array([[p[0] for p in r.per_model] for r in records], dtype=float)
    err = np.array([[p[1] for p in r.per_model] for r in records], dtype=np.int64)
    return u, err


@functools.lru_cache(maxsize=256)
def max_errors_table(alpha: float, n: int, correction: int = 1) -> np.ndarray:
    """Largest error count allowed at each selection size ``k = 0..n``.

    Entry ``k`` is the largest integer ``E`` with ``E - alpha*k <= -correction``
    evaluated in exact rational arithmetic on the binary value of ``alpha``;
    ``-1`` when no count qualifies. Comparing integer counts against this
    table keeps the feasibility test free of rounding.
    """
    a = Fraction(alpha)
    num, den = a.numerator, a.denominator
    c = int(correction)
    out = np.empty(n + 1, dtype=np.int64)
    for k in range(n + 1):
        e = (num * k - c * den) // den
        out[k] = e if e >= 0 else -1
    out.setflags(write=False)
    return out


def margin_value(errors: int, selected: int, alpha: float) -> float:
    return float(errors) - alpha * float(selected)
