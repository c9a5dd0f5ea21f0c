"""Solve, audit and compare pipelines shared by the command line and tests."""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from .instance import Instance, generate_random, p_max_candidates, preprocess_small_jobs
from .max_flow import solve_max
from .oracle import DEFAULT_CAP, oracle_max, oracle_total
from .schedule import Metrics, Schedule, metrics, validate
from .total_flow import overload_profile, solve_total, tentative_to_schedule
from .verifier import (
    AuditReport,
    Check,
    audit_max,
    audit_total,
    max_mutations,
    round_limit,
    total_mutations,
)

SCHEMA_VERSION = 1


def rational(x) -> dict:
    """Exact ``num/den`` string next to a decimal approximation."""
    x = Fraction(x)
    return {"exact": f"{x.numerator}/{x.denominator}", "decimal": float(x)}


@dataclass
class Outcome:
    objective: str
    schedule: Schedule
    metrics: Metrics
    trace: dict
    report: AuditReport | None
    rounds: int
    bound: Fraction
    p_max: int | None
    result: object
    solved_on: Instance
    guess: int | None = None

    def summary(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "objective": self.objective,
            "total_flow": rational(self.metrics.total_flow),
            "max_flow": rational(self.metrics.max_flow),
            "total_fractional_flow": rational(self.metrics.total_fractional_flow),
            "rounds": self.rounds,
            "audit": "skipped" if self.report is None else ("pass" if self.report.passed else "fail"),
        }
        if self.objective == "total":
            out["lp_objective"] = rational(self.bound)
            out["preprocess_guess"] = self.guess
        else:
            out["D"] = rational(self.bound)
            out["p_max"] = self.p_max
        return out


def _total_once(work: Instance, original: Instance, audit: bool, inject: str | None) -> Outcome:
    result = solve_total(work)
    res, tentative = result, result.tentative
    schedule = tentative_to_schedule(work, tentative)
    if inject:
        res, tentative, schedule = total_mutations(work, result, schedule)[inject]
    report = audit_total(work, res, tentative, schedule) if audit else None
    if work is not original:
        schedule = tentative_to_schedule(original, tentative)
        if report is not None:
            problems = validate(schedule, original)
            report.checks.append(
                Check("original_sizes", 0, len(problems), not problems, "; ".join(problems[:5]))
            )
    return Outcome(
        "total", schedule, metrics(schedule), res.trace.to_dict(), report,
        res.rounds, res.lp0_objective, None, res, work,
    )


def run_total(
    inst: Instance, audit: bool = True, preprocess: bool = False, inject: str | None = None
) -> Outcome:
    """Total flow; with ``preprocess`` try every size guess and keep the best."""
    if not preprocess:
        return _total_once(inst, inst, audit, inject)
    if inject:
        raise ValueError("fault injection and preprocessing do not combine")
    best = None
    for guess in p_max_candidates(inst):
        out = _total_once(preprocess_small_jobs(inst, guess), inst, audit, None)
        out.guess = guess
        if best is None or out.metrics.total_flow < best.metrics.total_flow:
            best = out
    return best


def run_max(inst: Instance, audit: bool = True, inject: str | None = None) -> Outcome:
    result = solve_max(inst)
    res, assignment, schedule, D = result, result.assignment, result.schedule, result.D
    if inject:
        res, assignment, schedule, D = max_mutations(inst, result)[inject]
    report = audit_max(inst, res, assignment, schedule, D) if audit else None
    return Outcome(
        "max", schedule, metrics(schedule), res.trace.to_dict(), report,
        res.rounds, Fraction(D), res.p_max, res, inst,
    )


def compare(inst: Instance, cap: int = DEFAULT_CAP) -> dict:
    """Algorithm against oracle for both objectives. Raises if the oracle cannot run."""
    tot = run_total(inst)
    mx = run_max(inst)
    ot = oracle_total(inst, cap)
    om = oracle_max(inst, cap)
    alg_t, alg_m = tot.metrics.total_flow, mx.metrics.max_flow
    largest = max(mx.schedule.size.values())
    gap = alg_m - om.value
    return {
        "schema_version": SCHEMA_VERSION,
        "n": inst.n,
        "m": inst.m,
        "audit": all(o.report.passed for o in (tot, mx)),
        "total": {
            "alg": rational(alg_t),
            "oracle": rational(ot.value),
            "ratio": rational(Fraction(alg_t, ot.value)),
        },
        "max": {
            "alg": rational(alg_m),
            "oracle": rational(om.value),
            "ratio": rational(Fraction(alg_m, om.value)),
            "D": rational(mx.bound),
            "p_max": mx.p_max,
            "gap": rational(gap),
            "gap_in_p_max": rational(Fraction(gap, mx.p_max)),
            "gap_in_assigned_p_max": rational(Fraction(gap, largest)),
        },
    }


# --------------------------------------------------------------------- grids


@dataclass(frozen=True)
class Point:
    n: int
    m: int
    pmax: int
    rmax: int
    density: float
    seed: int

    def instance(self) -> Instance:
        return generate_random(self.n, self.m, self.pmax, self.rmax, self.density, self.seed)

    def label(self) -> str:
        return f"n{self.n}_m{self.m}_p{self.pmax}_r{self.rmax}_d{self.density}_s{self.seed}"


def grid(ns, ms, pmaxes, rmaxes, densities, seeds) -> list[Point]:
    return [Point(*combo) for combo in itertools.product(ns, ms, pmaxes, rmaxes, densities, seeds)]


class BenchFailure(RuntimeError):
    def __init__(self, point: Point, instance: Instance, reason: str):
        super().__init__(f"{point.label()}: {reason}")
        self.point = point
        self.instance = instance
        self.reason = reason


def bench_point(point: Point, cap: int = DEFAULT_CAP) -> dict:
    """One grid row. Raises :class:`BenchFailure` on an audit failure."""
    inst = point.instance()
    tot = run_total(inst)
    mx = run_max(inst)
    for out in (tot, mx):
        if not out.report.passed:
            names = ", ".join(c.lemma for c in out.report.failures())
            raise BenchFailure(point, inst, f"{out.objective} audit failed: {names}")
    profile = overload_profile(inst, tot.result.tentative)
    units = max(profile.normalized().values())
    row = {
        "point": {
            "n": point.n, "m": point.m, "pmax": point.pmax, "rmax": point.rmax,
            "density": point.density, "seed": point.seed,
        },
        "round_limit": round_limit(inst.n),
        "total": {
            "flow": tot.metrics.total_flow,
            "lp_objective": rational(tot.bound),
            "rounds": tot.rounds,
            "overload_units": rational(units),
            "overload_bound_units": 8 + 10 * tot.rounds,
        },
        "max": {
            "flow": mx.metrics.max_flow,
            "D": int(mx.bound),
            "p_max": mx.p_max,
            "rounds": mx.rounds,
        },
    }
    if inst.n <= cap:
        ot = oracle_total(inst, cap).value
        om = oracle_max(inst, cap).value
        if tot.metrics.total_flow < ot or mx.metrics.max_flow < om:
            raise BenchFailure(point, inst, "algorithm beats the oracle")
        row["total"]["oracle"] = ot
        row["total"]["ratio"] = rational(Fraction(tot.metrics.total_flow, ot))
        row["max"]["oracle"] = om
        row["max"]["gap_in_p_max"] = rational(Fraction(mx.metrics.max_flow - om, mx.p_max))
    return row


def _safe_point(args):
    point, cap = args
    try:
        return bench_point(point, cap)
    except BenchFailure as exc:
        return exc


def run_bench(points: list[Point], cap: int = DEFAULT_CAP, workers: int = 1) -> dict:
    """Ordered reduce over the grid. The first failure in grid order is raised."""
    jobs = [(p, cap) for p in points]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_safe_point, jobs, chunksize=4))
    else:
        rows = []
        for job in jobs:
            rows.append(_safe_point(job))
            if isinstance(rows[-1], BenchFailure):
                break
    for row in rows:
        if isinstance(row, BenchFailure):
            raise row
    return summarize(rows)


def _max_rational(values) -> dict | None:
    values = list(values)
    return rational(max(values)) if values else None


def summarize(rows: list[dict]) -> dict:
    def frac(r):
        return Fraction(r["exact"])

    with_oracle = [r for r in rows if "oracle" in r["total"]]
    return {
        "schema_version": SCHEMA_VERSION,
        "instances": len(rows),
        "oracle_instances": len(with_oracle),
        "summary": {
            "max_rounds_total": max(r["total"]["rounds"] for r in rows),
            "max_rounds_max": max(r["max"]["rounds"] for r in rows),
            "rounds_within_limit": all(
                r["total"]["rounds"] <= r["round_limit"] and r["max"]["rounds"] <= r["round_limit"]
                for r in rows
            ),
            "max_overload_units": _max_rational(frac(r["total"]["overload_units"]) for r in rows),
            "max_total_ratio": _max_rational(frac(r["total"]["ratio"]) for r in with_oracle),
            "max_max_gap_in_p_max": _max_rational(
                frac(r["max"]["gap_in_p_max"]) for r in with_oracle
            ),
            "log2_n_bound": max(math.ceil(math.log2(r["point"]["n"])) + 1 for r in rows),
        },
        "rows": rows,
    }
