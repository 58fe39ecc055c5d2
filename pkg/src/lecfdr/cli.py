"""Command-line entry point: ``lecfdr <subcommand> ...``.

Exit status is 0 on success (an infeasible risk level is a result, not a
failure), 1 for data/IO errors and 2 for usage errors. Errors are printed to
stderr as a JSON object.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .coin import calibrate_coin
from .core import MultiRecord, ValidationError
from .harness import METHODS, compare_methods
from .io import (
    DatasetError,
    decision_from_dict,
    decision_to_dict,
    parse_dataset,
    write_dataset,
    write_decision_report,
    write_eval_report,
)
from .routing import DEFAULT_TIE_POLICY, STRATEGIES, TIE_POLICIES, calibrate_multi, calibrate_routing, gate_cascade
from .single import calibrate_single, gate_single, min_feasible_alpha
from .synthetic import GenSpec, default_paired_spec, default_spec, gen_paired, gen_single, mc_validate_theorem

CALIBRATE_METHODS = ("lec", "coin-cp", "coin-hfd", "lec-route", "lec-multi")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _alpha_list(args) -> list[float]:
    if args.alpha is not None and args.alphas:
        raise UsageError("--alpha and --alphas are mutually exclusive")
    if args.alphas:
        vals = [float(a) for a in args.alphas.split(",") if a.strip()]
    elif args.alpha is not None:
        vals = [args.alpha]
    else:
        raise UsageError("one of --alpha or --alphas is required")
    for a in vals:
        if not 0.0 < a < 1.0:
            raise UsageError(f"alpha must lie in (0, 1), got {a}")
    return vals


def _check_delta(args):
    if not 0.0 < args.delta < 1.0:
        raise UsageError(f"--delta must lie in (0, 1), got {args.delta}")


def _config(args, **extra) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
    cfg.update(extra)
    return cfg


def cmd_calibrate(args) -> int:
    alphas = _alpha_list(args)
    _check_delta(args)
    records = parse_dataset(args.input)
    multi = bool(records) and isinstance(records[0], MultiRecord)
    method = args.method or ("lec-route" if multi and records[0].m == 2 else "lec-multi" if multi else "lec")
    if method in ("lec", "coin-cp", "coin-hfd") and multi:
        raise UsageError(f"method {method} needs single-model data (columns id,uncertainty,error)")
    if method in ("lec-route", "lec-multi") and not multi:
        raise UsageError(f"method {method} needs multi-model data (columns id,u_1..,err_1..)")
    decisions = []
    for a in alphas:
        if method == "lec":
            d = calibrate_single(records, a)
        elif method in ("coin-cp", "coin-hfd"):
            d = calibrate_coin(records, a, args.delta, method[5:])
        elif method == "lec-route":
            d = calibrate_routing(records, a, args.tie_policy)
        else:
            d = calibrate_multi(records, a, args.strategy, args.tie_policy)
        decisions.append(d)
    path = write_decision_report(decisions, args.out, _config(args, method=method, alphas=alphas,
                                 n_records=len(records)))
    print(json.dumps({"summary": str(path), "status": [d.status for d in decisions]}))
    return 0


def cmd_gate(args) -> int:
    with open(args.decision) as fh:
        saved = json.load(fh)
    entries = saved["decisions"] if "decisions" in saved else [saved]
    if args.index >= len(entries):
        raise UsageError(f"--index {args.index} out of range ({len(entries)} saved decisions)")
    d = decision_from_dict(entries[args.index])
    records = parse_dataset(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    accepted = errors = 0
    with open(out / "gated.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "accepted_model", "error"])
        for r in records:
            if isinstance(r, MultiRecord):
                g = gate_cascade(d, [p[0] for p in r.per_model], [p[1] for p in r.per_model])
            else:
                g = gate_single(d, r.u, r.err)
            accepted += g.S
            errors += g.Z
            w.writerow([r.id, "" if g.model is None else g.model, "" if g.model is None else g.err_if_accepted])
    body = {
        "toolkit": "lecfdr",
        "version": __version__,
        "config": _config(args),
        "decision": decision_to_dict(d),
        "n": len(records),
        "accepted": accepted,
        "accepted_errors": errors,
        "fdr": errors / accepted if accepted else None,
    }
    with open(out / "gate_summary.json", "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps({"accepted": accepted, "n": len(records)}))
    return 0


def _evaluate(args, methods: list[str]) -> int:
    alphas = _alpha_list(args)
    _check_delta(args)
    if not 0.0 < args.ratio < 1.0:
        raise UsageError(f"--ratio must lie in (0, 1), got {args.ratio}")
    records = parse_dataset(args.input)
    summaries, table = compare_methods(records, methods, alphas, args.splits, args.ratio, args.seed,
                                       args.delta, args.strategy, args.workers)
    paths = write_eval_report(summaries, table, args.out, _config(args, methods=methods, alphas=alphas))
    print(json.dumps({"outputs": [str(p) for p in paths]}))
    return 0


def cmd_evaluate(args) -> int:
    return _evaluate(args, [args.method])


def cmd_compare(args) -> int:
    return _evaluate(args, [m.strip() for m in args.methods.split(",") if m.strip()])


def _load_spec(args, paired: bool) -> GenSpec:
    if args.spec:
        with open(args.spec) as fh:
            spec = GenSpec.from_dict(json.load(fh))
    elif paired:
        spec = default_paired_spec(args.rho)
    else:
        spec = default_spec()
    return spec.with_(seed=args.seed)


def cmd_simulate(args) -> int:
    if args.generate is not None:
        spec = _load_spec(args, args.models == 2)
        records = gen_paired(spec, args.generate) if args.models == 2 else gen_single(spec, args.generate)
        if not args.out:
            raise UsageError("--generate needs --out FILE")
        write_dataset(records, args.out)
        print(json.dumps({"written": args.out, "n": len(records)}))
        return 0
    if not args.theorem:
        raise UsageError("simulate needs --theorem or --generate")
    if args.alpha is None:
        raise UsageError("--alpha is required with --theorem")
    spec = _load_spec(args, args.theorem == "t2")
    res = mc_validate_theorem(args.theorem, spec, args.alpha, args.n_cal, args.replications, args.seed,
                              workers=args.workers)
    body = {"toolkit": "lecfdr", "version": __version__, "config": _config(args), "spec": spec.to_dict(),
            "result": res}
    text = json.dumps(body, indent=2, sort_keys=True)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "simulation.json").write_text(text + "\n")
    print(text)
    return 0


def cmd_min_alpha(args) -> int:
    records = parse_dataset(args.input)
    if records and isinstance(records[0], MultiRecord):
        vals = {f"model_{k + 1}": min_feasible_alpha([r.project(k) for r in records]) for k in range(records[0].m)}
    else:
        vals = {"model_1": min_feasible_alpha(records)}
    print(json.dumps({"min_feasible_alpha": vals, "n": len(records)}, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lecfdr", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"lecfdr {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def risk(sp, need_out=True):
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--alphas", help="comma-separated risk levels")
        sp.add_argument("--delta", type=float, default=0.05)
        sp.add_argument("--input", required=True)
        sp.add_argument("--out", required=need_out)
        sp.add_argument("--strategy", choices=STRATEGIES, default="exact")
        sp.add_argument("--tie-policy", choices=TIE_POLICIES, default=DEFAULT_TIE_POLICY)

    c = sub.add_parser("calibrate", help="calibrate thresholds on a dataset")
    risk(c)
    c.add_argument("--method", choices=CALIBRATE_METHODS)
    c.set_defaults(func=cmd_calibrate)

    g = sub.add_parser("gate", help="apply a saved decision to new records")
    g.add_argument("--decision", required=True, help="summary.json written by calibrate")
    g.add_argument("--index", type=int, default=0, help="which saved decision to apply")
    g.add_argument("--input", required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gate)

    for name, fn, helptext in (("evaluate", cmd_evaluate, "repeated random-split evaluation"),
                               ("compare", cmd_compare, "several methods on shared splits")):
        e = sub.add_parser(name, help=helptext)
        risk(e)
        if name == "evaluate":
            e.add_argument("--method", default="lec", help=f"one of {', '.join(METHODS)} (single-model methods accept ':k')")
        else:
            e.add_argument("--methods", default="lec,coin-cp,coin-hfd")
        e.add_argument("--ratio", type=float, default=0.5)
        e.add_argument("--splits", type=int, default=100)
        e.add_argument("--seed", type=int, default=0)
        e.add_argument("--workers", type=int, default=1)
        e.set_defaults(func=fn)

    s = sub.add_parser("simulate", help="synthetic data and Monte Carlo guarantee checks")
    s.add_argument("--theorem", choices=("t1", "t2"))
    s.add_argument("--alpha", type=float)
    s.add_argument("--replications", type=int, default=20000)
    s.add_argument("--n-cal", type=int, default=500)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--rho", type=float, default=0.0)
    s.add_argument("--spec", help="JSON generator spec")
    s.add_argument("--generate", type=int, help="write this many synthetic records to --out")
    s.add_argument("--models", type=int, choices=(1, 2), default=1)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("min-alpha", help="smallest feasible risk level per model")
    m.add_argument("--input", required=True)
    m.set_defaults(func=cmd_min_alpha)
    return p


def _fail(kind: str, message: str, code: int, details=None) -> int:
    err = {"error": {"type": kind, "message": message}}
    if details:
        err["error"]["details"] = details
    print(json.dumps(err), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("a subcommand is required: calibrate, gate, evaluate, compare, simulate, min-alpha")
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", str(exc), 2)
    except DatasetError as exc:
        return _fail("dataset", str(exc), 1, [{"line": ln, "message": msg} for ln, msg in exc.problems])
    except ValidationError as exc:
        return _fail("validation", str(exc), 1, [{"row": i, "message": msg} for i, msg in exc.problems])
    except (OSError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())
