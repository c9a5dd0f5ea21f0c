"""Command-line front end.

Exit codes: 0 success, 1 bad input or infeasible, 2 usage, 3 audit failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench
from .instance import InstanceError, generate_random, load, save
from .oracle import DEFAULT_CAP, OracleSizeError
from .total_flow import RoundingError
from .verifier import MAX_MUTATIONS, TOTAL_MUTATIONS

OK, BAD_INPUT, USAGE, AUDIT = 0, 1, 2, 3


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return value


def _nonneg(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"{text} is negative")
    return value


def _density(text: str) -> float:
    value = float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError("density must lie in (0, 1]; every job needs a machine")
    return value


def _int_range(text: str) -> list[int]:
    """``"2-5"``, ``"2,4"`` or a mix such as ``"1,3-4"``."""
    out: list[int] = []
    for part in filter(None, text.split(",")):
        lo, sep, hi = part.partition("-")
        try:
            out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad range {part!r}") from None
    return out


def _float_list(text: str) -> list[float]:
    try:
        return [_density(x) for x in filter(None, text.split(","))]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad density list {text!r}") from None


def _write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _print(data) -> None:
    print(json.dumps(data, indent=2, sort_keys=True))


def cmd_generate(args) -> int:
    inst = generate_random(args.n, args.m, args.pmax, args.rmax, args.density, args.seed)
    save(inst, args.out)
    return OK


def cmd_solve(args) -> int:
    inst = load(args.input)
    if args.preprocess and args.objective != "total":
        args.parser.error("--preprocess applies to --objective total only")
    if args.inject:
        kinds = TOTAL_MUTATIONS if args.objective == "total" else MAX_MUTATIONS
        if args.inject not in kinds:
            args.parser.error(f"--inject for {args.objective} must be one of {', '.join(kinds)}")
        if args.no_audit or args.preprocess:
            args.parser.error("--inject needs the audit and no preprocessing")
    if args.no_audit:
        print("warning: audit disabled; results are unchecked", file=sys.stderr)
    if args.objective == "total":
        out = bench.run_total(inst, audit=not args.no_audit, preprocess=args.preprocess, inject=args.inject)
    else:
        out = bench.run_max(inst, audit=not args.no_audit, inject=args.inject)
    if args.out:
        sched = out.schedule.to_dict()
        sched["metrics"] = {k: v for k, v in out.summary().items() if k.endswith("flow")}
        _write_json(args.out, sched)
    if args.trace:
        _write_json(args.trace, out.trace)
    if args.report and out.report is not None:
        _write_json(args.report, out.report.to_dict())
    _print(out.summary())
    if out.report is not None and not out.report.passed:
        for c in out.report.failures():
            print(f"audit failure: {c.lemma}: {c.detail}", file=sys.stderr)
        return AUDIT
    return OK


def cmd_compare(args) -> int:
    inst = load(args.input)
    data = bench.compare(inst, args.cap)
    _print(data)
    if not data["audit"]:
        print("audit failure during compare", file=sys.stderr)
        return AUDIT
    if data["total"]["ratio"]["decimal"] < 1 or data["max"]["ratio"]["decimal"] < 1:
        print("algorithm beats the oracle; one of them is wrong", file=sys.stderr)
        return AUDIT
    return OK


def cmd_bench(args) -> int:
    points = bench.grid(args.n, args.m, args.pmax, args.rmax, args.density, args.seeds)
    if not points:
        args.parser.error("empty grid")
    if min(args.n + args.m + args.pmax) < 1 or min(args.rmax) < 0:
        args.parser.error("grid needs n, m, pmax >= 1 and rmax >= 0")
    try:
        report = bench.run_bench(points, args.cap, args.workers)
    except bench.BenchFailure as exc:
        workdir = Path(args.workdir) if args.workdir else Path(args.out).resolve().parent / "failing"
        workdir.mkdir(parents=True, exist_ok=True)
        path = workdir / f"{exc.point.label()}.json"
        save(exc.instance, path)
        print(f"{exc.reason}; failing instance: {path}", file=sys.stderr)
        return AUDIT
    _write_json(args.out, report)
    _print(report["summary"])
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowround", description="LP rounding for flow-time scheduling on unrelated machines"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random instance")
    g.add_argument("--n", type=_positive, required=True)
    g.add_argument("--m", type=_positive, required=True)
    g.add_argument("--pmax", type=_positive, required=True)
    g.add_argument("--rmax", type=_nonneg, required=True)
    g.add_argument("--density", type=_density, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(parser=g, func=cmd_generate)

    s = sub.add_parser("solve", help="solve one instance and audit the run")
    s.add_argument("--objective", choices=("total", "max"), required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", help="schedule JSON")
    s.add_argument("--trace", help="per-round trace JSON")
    s.add_argument("--report", help="audit report JSON")
    s.add_argument("--preprocess", action="store_true", help="try every size guess (total only)")
    s.add_argument("--no-audit", action="store_true", help="skip the audit (timing runs)")
    s.add_argument(
        "--inject", choices=sorted(set(TOTAL_MUTATIONS) | set(MAX_MUTATIONS)),
        help="corrupt the artifacts before auditing; for testing the auditor",
    )
    s.set_defaults(parser=s, func=cmd_solve)

    c = sub.add_parser("compare", help="algorithm against the brute-force oracle")
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--cap", type=_positive, default=DEFAULT_CAP)
    c.set_defaults(parser=c, func=cmd_compare)

    b = sub.add_parser("bench", help="generate, solve and compare over a grid")
    b.add_argument("--n", type=_int_range, default=_int_range("2-5"))
    b.add_argument("--m", type=_int_range, default=_int_range("1-2"))
    b.add_argument("--pmax", type=_int_range, default=_int_range("2,4"))
    b.add_argument("--rmax", type=_int_range, default=_int_range("0,4"))
    b.add_argument("--density", type=_float_list, default=[1.0, 0.7])
    b.add_argument("--seeds", type=_int_range, default=_int_range("0-9"))
    b.add_argument("--cap", type=_positive, default=DEFAULT_CAP)
    b.add_argument("--workers", type=_positive, default=1)
    b.add_argument("--workdir", help="where a failing instance is written")
    b.add_argument("--out", required=True)
    b.set_defaults(parser=b, func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InstanceError, OSError, OracleSizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT
    except RoundingError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return AUDIT


if __name__ == "__main__":
    sys.exit(main())
