"""Dataset parsing and report files (summary.json, per_split.csv, curves.csv)."""

from __future__ import annotations

import csv
import json
import math
import os
import re
from dataclasses import asdict
from pathlib import Path
from typing import Any, Iterable, Sequence

from . import __version__
from .core import BELOW_MIN, MultiRecord, Record, ThresholdDecision
from .harness import EvalSummary, SplitReport, summarize

SINGLE_COLUMNS = ("id", "uncertainty", "error")
_U_COL = re.compile(r"^u_(\d+)$")
_E_COL = re.compile(r"^err_(\d+)$")

PER_SPLIT_COLUMNS = (
    "method", "alpha", "split_index", "sub_seed", "feasible", "test_fdr", "power", "accepted_total",
    "accepted_correct", "abstained", "n_test", "test_correct", "thresholds", "credited",
)
CURVE_COLUMNS = ("method", "alpha", "fdr_mean", "fdr_std", "power_mean", "power_std", "feasibility_rate")


class DatasetError(ValueError):
    """Bad dataset file; ``problems`` lists ``(line, message)`` pairs."""

    def __init__(self, path, problems: list[tuple[int, str]]):
        self.path = str(path)
        self.problems = problems
        super().__init__(f"{path}: " + "; ".join(f"line {ln}: {msg}" for ln, msg in problems))


def fmt_float(x: float) -> str:
    """17 significant digits, enough for any double to round-trip."""
    if x == BELOW_MIN:
        return "below_min"
    return format(float(x), ".17g")


def parse_float(text: str) -> float:
    if text == "below_min":
        return BELOW_MIN
    return float(text)


def _schema(header: Sequence[str]) -> tuple[str, int, dict[str, int]]:
    cols = [h.strip() for h in header]
    if "id" not in cols:
        raise ValueError("missing column 'id'")
    if "uncertainty" in cols or "error" in cols:
        missing = [c for c in SINGLE_COLUMNS if c not in cols]
        if missing:
            raise ValueError("missing columns " + ", ".join(repr(c) for c in missing))
        return "single", 1, {c: cols.index(c) for c in SINGLE_COLUMNS}
    us = {int(m.group(1)): i for i, c in enumerate(cols) if (m := _U_COL.match(c))}
    es = {int(m.group(1)): i for i, c in enumerate(cols) if (m := _E_COL.match(c))}
    if not us:
        raise ValueError("missing columns: expected 'uncertainty','error' or 'u_1','err_1',...")
    m = max(us)
    want = set(range(1, m + 1))
    if set(us) != want or set(es) != want:
        raise ValueError(f"model columns must be u_1..u_{m} and err_1..err_{m}")
    index = {"id": cols.index("id")}
    for k in range(1, m + 1):
        index[f"u_{k}"] = us[k]
        index[f"err_{k}"] = es[k]
    return "multi", m, index


def _parse_pair(u_text: Any, e_text: Any, prefix: str = "") -> tuple[float, int] | str:
    try:
        u = float(u_text)
    except (TypeError, ValueError):
        return f"non-numeric {prefix}uncertainty"
    if not math.isfinite(u):
        return f"non-finite {prefix}uncertainty"
    try:
        e = float(e_text)
    except (TypeError, ValueError):
        return f"non-numeric {prefix}error"
    if e not in (0.0, 1.0):
        return f"{prefix}error label not binary"
    return u, int(e)


def _rows_csv(path: Path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(path, [(1, "empty file")]) from None
        yield 1, header
        for row in reader:
            if row:
                yield reader.line_num, row


def _rows_jsonl(path: Path):
    header = None
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(path, [(ln, f"invalid JSON ({exc.msg})")]) from None
            if header is None:
                header = list(obj)
                yield 0, header
            yield ln, [obj.get(h) for h in header]


def detect_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".jsonl", ".ndjson", ".json"):
        return "jsonl"
    return "csv"


def parse_dataset(path, fmt: str | None = None) -> list[Record] | list[MultiRecord]:
    """Read a CSV or JSON-lines dataset.

    Single-model files have columns ``id,uncertainty,error``; multi-model
    files have ``id,u_1..u_M,err_1..err_M``. Every bad row is reported with
    its line number.
    """
    path = Path(path)
    fmt = fmt or detect_format(path)
    rows = _rows_csv(path) if fmt == "csv" else _rows_jsonl(path)
    try:
        _, header = next(rows)
    except StopIteration:
        raise DatasetError(path, [(1, "empty file")]) from None
    try:
        kind, m, idx = _schema(header)
    except ValueError as exc:
        raise DatasetError(path, [(1, str(exc))]) from None
    width = len(header)
    out: list = []
    problems: list[tuple[int, str]] = []
    for ln, row in rows:
        if len(row) != width:
            problems.append((ln, f"expected {width} fields, got {len(row)}"))
            continue
        rid = row[idx["id"]]
        if kind == "single":
            got = _parse_pair(row[idx["uncertainty"]], row[idx["error"]])
            if isinstance(got, str):
                problems.append((ln, got))
            else:
                out.append(Record(rid, *got))
        else:
            pairs = []
            for k in range(1, m + 1):
                got = _parse_pair(row[idx[f"u_{k}"]], row[idx[f"err_{k}"]], f"model {k} ")
                if isinstance(got, str):
                    problems.append((ln, got))
                    break
                pairs.append(got)
            else:
                out.append(MultiRecord(rid, tuple(pairs)))
    if problems:
        raise DatasetError(path, problems)
    return out


def write_dataset(records: Sequence[Record] | Sequence[MultiRecord], path, fmt: str | None = None) -> Path:
    path = Path(path)
    fmt = fmt or detect_format(path)
    multi = bool(records) and isinstance(records[0], MultiRecord)
    if multi:
        m = records[0].m
        header = ["id"] + [f"u_{k}" for k in range(1, m + 1)] + [f"err_{k}" for k in range(1, m + 1)]
        rows = [[r.id] + [fmt_float(p[0]) for p in r.per_model] + [p[1] for p in r.per_model] for r in records]
    else:
        header = list(SINGLE_COLUMNS)
        rows = [[r.id, fmt_float(r.u), r.err] for r in records]
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    else:
        with open(path, "w") as fh:
            for row in rows:
                obj = dict(zip(header, row))
                for k, v in obj.items():
                    if k.startswith("u") and isinstance(v, str):
                        obj[k] = float(v)
                fh.write(json.dumps(obj) + "\n")
    return path


def _json_threshold(x: float):
    return "below_min" if x == BELOW_MIN else x


def decision_to_dict(d: ThresholdDecision) -> dict:
    return {
        "status": d.status,
        "method": d.method,
        "alpha": d.alpha,
        "thresholds": None if d.thresholds is None else [_json_threshold(t) for t in d.thresholds],
        "accepted_on_cal": d.accepted_on_cal,
        "errors_on_cal": d.errors_on_cal,
        "margin": d.margin,
        "info": d.info,
    }


def decision_from_dict(obj: dict) -> ThresholdDecision:
    thr = obj.get("thresholds")
    if thr is not None:
        thr = tuple(BELOW_MIN if t == "below_min" else float(t) for t in thr)
    return ThresholdDecision(
        obj["status"], thr, int(obj.get("accepted_on_cal", 0)), obj.get("margin"),
        int(obj.get("errors_on_cal", 0)), obj.get("method", "lec"), obj.get("alpha"), dict(obj.get("info") or {}),
    )


def _write_json(path: Path, obj: Any) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def write_decision_report(decisions: Iterable[ThresholdDecision], out_dir, config: dict) -> Path:
    """summary.json for one or more calibrations (e.g. an alpha list)."""
    body = {
        "toolkit": "lecfdr",
        "version": __version__,
        "config": config,
        "decisions": [decision_to_dict(d) for d in decisions],
    }
    return _write_json(Path(out_dir) / "summary.json", body)


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return fmt_float(x)
    if isinstance(x, (tuple, list)):
        return ";".join(_cell(v) for v in x)
    return str(x)


def write_eval_report(summaries: Sequence[EvalSummary], table: Sequence[SplitReport], out_dir, config: dict) -> list[Path]:
    out = Path(out_dir)
    paths = [_write_json(out / "summary.json", {
        "toolkit": "lecfdr",
        "version": __version__,
        "config": config,
        "summaries": [s.as_dict() for s in summaries],
    })]
    try:
        out.mkdir(parents=True, exist_ok=True)
        p = out / "per_split.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(PER_SPLIT_COLUMNS)
            for r in table:
                d = asdict(r)
                w.writerow([_cell(d[c]) for c in PER_SPLIT_COLUMNS])
        paths.append(p)
        p = out / "curves.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CURVE_COLUMNS)
            for s in summaries:
                d = s.as_dict()
                w.writerow([_cell(d[c]) for c in CURVE_COLUMNS])
        paths.append(p)
    except OSError as exc:
        raise OSError(f"cannot write report in {out}: {exc.strerror or exc}") from exc
    return paths


def _opt_float(x: str) -> float | None:
    return None if x == "" else float(x)


def read_per_split(path) -> list[SplitReport]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            thr = row["thresholds"]
            cred = row["credited"]
            out.append(SplitReport(
                split_index=int(row["split_index"]),
                method=row["method"],
                alpha=float(row["alpha"]),
                feasible=row["feasible"] == "1",
                test_fdr=_opt_float(row["test_fdr"]),
                power=_opt_float(row["power"]),
                accepted_total=int(row["accepted_total"]),
                accepted_correct=int(row["accepted_correct"]),
                abstained=int(row["abstained"]),
                n_test=int(row["n_test"]),
                test_correct=int(row["test_correct"]),
                thresholds=tuple(parse_float(t) for t in thr.split(";")) if thr else None,
                sub_seed=int(row["sub_seed"]),
                credited=tuple(int(c) for c in cred.split(";")) if cred else (),
            ))
    return out


def summaries_from_table(table: Sequence[SplitReport]) -> list[EvalSummary]:
    groups: dict[tuple[str, float], list[SplitReport]] = {}
    for r in table:
        groups.setdefault((r.method, r.alpha), []).append(r)
    return [summarize(sorted(v, key=lambda r: r.split_index), k[0], k[1]) for k, v in groups.items()]
