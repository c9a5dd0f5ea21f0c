"""Replays solver artifacts and checks every property the rounding relies on.

Each check yields a :class:`Check` with the bound that must hold, the value
actually observed and a pass flag. Constants are the explicit ones that fall
out of the arguments (``8 + 10R`` windows per class unit, ``6 p_max`` per
max-flow round), so slack against them is visible in the reports.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .instance import Instance
from .max_flow import MaxFlowResult, build_maxflow_lp, is_feasible, volume_check_max
from .schedule import (
    Schedule,
    Slice,
    at_most_one_partial_per_class,
    metrics,
    remaining_volume,
    tentative_remaining_volume,
    validate,
)
from .total_flow import TotalFlowResult, overload_profile, tentative_cost


def _json(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (list, tuple)):
        return [_json(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _json(v) for k, v in x.items()}
    return x


@dataclass
class Check:
    lemma: str
    bound: object
    observed: object
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "lemma": self.lemma,
            "bound": _json(self.bound),
            "observed": _json(self.observed),
            "pass": self.passed,
            "detail": self.detail,
        }


@dataclass
class AuditReport:
    objective: str
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def get(self, name: str) -> Check:
        for c in self.checks:
            if c.lemma == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "pass": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }


class AuditFailure(AssertionError):
    def __init__(self, report: AuditReport):
        names = ", ".join(c.lemma for c in report.failures())
        super().__init__(f"audit failed: {names}")
        self.report = report


def ceil_half(n: int) -> int:
    return -(-n // 2)


def round_limit(n: int) -> int:
    return math.ceil(math.log2(n)) + 1 if n > 1 else 1


def _halving(n: int, records, assigned_total: int) -> Check:
    counts = [rec.unassigned for rec in records]
    problems = []
    if not records:
        problems.append("trace has no rounds")
    elif counts[0] != n:
        problems.append(f"first round has {counts[0]} jobs, instance has {n}")
    for a, b in zip(records, records[1:]):
        if b.unassigned != a.unassigned - len(a.assigned):
            problems.append(f"round {b.index}: {b.unassigned} != {a.unassigned} - {len(a.assigned)}")
        if b.unassigned > ceil_half(a.unassigned):
            problems.append(f"round {b.index}: {b.unassigned} > ceil({a.unassigned}/2)")
        if b.index != a.index + 1:
            problems.append(f"round index jumps from {a.index} to {b.index}")
    if records and records[-1].unassigned != len(records[-1].assigned):
        problems.append("last round leaves jobs unassigned")
    if sum(len(rec.assigned) for rec in records) != n or assigned_total != n:
        problems.append("rounds do not account for every job exactly once")
    limit = round_limit(n)
    if len(records) > limit:
        problems.append(f"{len(records)} rounds exceed {limit}")
    seq = counts + [0]
    return Check("halving", {"rounds": limit, "per_round": "ceil(N/2)"},
                 {"rounds": len(records), "unassigned": seq}, not problems, "; ".join(problems))


# ---------------------------------------------------------------- total flow


def _window_sums(per_slot: list) -> list:
    prefix = [Fraction(0)]
    for x in per_slot:
        prefix.append(prefix[-1] + x)
    return prefix


def _total_volume_per_round(inst: Instance, result: TotalFlowResult, i: int, k: int, T: int):
    """Per-slot volume of class <= k work on machine i after each round."""
    fixed = [Fraction(0)] * T
    out = []
    for rec in result.trace.records:
        cur = list(fixed)
        for (mi, j, t), y in rec.solution.items():
            if mi == i and y and inst.job(j).p[i] <= 2**k:
                cur[t] += y
        out.append(cur)
        for j, (mi, t) in rec.assigned.items():
            if mi == i and inst.job(j).p[i] <= 2**k:
                fixed[t] += inst.job(j).p[i]
    return out


def _well_formed_total(inst: Instance, tentative: dict, schedule: Schedule) -> Check:
    problems = []
    T = inst.horizon
    if set(tentative) != {job.id for job in inst.jobs}:
        problems.append("tentative assignment does not cover every job exactly once")
    for j, (i, t) in tentative.items():
        try:
            job = inst.job(j)
        except KeyError:
            problems.append(f"unknown job {j}")
            continue
        if not 0 <= i < inst.m or not job.eligible(i):
            problems.append(f"job {j} placed on ineligible machine {i}")
        if not job.r <= t < T:
            problems.append(f"job {j} placed at slot {t} outside [{job.r}, {T})")
    problems += validate(schedule, inst)
    for j, (i, _) in tentative.items():
        if schedule.assignment.get(j) != i:
            problems.append(f"job {j} runs on {schedule.assignment.get(j)} but is assigned to {i}")
    return Check("well_formed", 0, len(problems), not problems, "; ".join(problems[:5]))


def audit_total(
    inst: Instance, result: TotalFlowResult, tentative: dict, schedule: Schedule
) -> AuditReport:
    report = AuditReport("total")
    records = result.trace.records
    R = len(records)
    well = _well_formed_total(inst, tentative, schedule)
    report.checks.append(well)
    report.checks.append(_halving(inst.n, records, len(tentative)))

    # tight capacity rows versus half the live jobs
    worst, problems = [], []
    for rec in records:
        limit = ceil_half(rec.unassigned)
        worst.append(max(rec.tight_capacity, rec.tight_capacity_all))
        if max(rec.tight_capacity, rec.tight_capacity_all) > limit:
            problems.append(f"round {rec.index}: {rec.tight_capacity_all} tight > {limit}")
    report.checks.append(
        Check("tight_capacity_tokens", [ceil_half(r.unassigned) for r in records], worst,
              not problems, "; ".join(problems))
    )

    # each program must accept the previous solution
    problems = []
    for prev, rec in zip(records, records[1:]):
        carried = {v: prev.solution.get(v, 0) for v in rec.lp.variables}
        if any(prev.solution.get(v, 0) <= 0 for v in rec.lp.variables):
            problems.append(f"round {rec.index} keeps a variable that was zero")
        if not rec.lp.is_feasible_point(carried):
            problems.append(f"round {rec.index} rejects the round {prev.index} solution")
        elif rec.objective > rec.lp.objective_value(carried):
            problems.append(f"round {rec.index} optimum exceeds the carried solution")
    report.checks.append(Check("relaxation_chain", 0, len(problems), not problems, "; ".join(problems)))

    cost = tentative_cost(inst, tentative) if well.passed else None
    lp0 = records[0].objective if records else None
    ok = cost is not None and lp0 is not None and cost <= lp0
    report.checks.append(Check("cost_preservation", lp0, cost, ok))

    # window overload and per-round volume growth
    T = inst.horizon
    profile = overload_profile(inst, tentative) if well.passed else None
    problems, observed = [], {}
    if profile is None:
        problems.append("tentative assignment malformed")
    else:
        for (i, k), e in profile.excess.items():
            bound = (8 + 10 * R) * 2**k
            observed[f"{i},{k}"] = e
            if e > bound:
                problems.append(f"machine {i} class<={k}: excess {e} > {bound}")
        growth = _volume_growth_total(inst, result, T)
        problems += growth
    report.checks.append(
        Check("window_overload", "(8 + 10R) * 2^k", observed, not problems, "; ".join(problems[:5]))
    )

    horizon = max([T] + [sl.end for ms in schedule.machines for sl in ms]) + 1
    # backlog of the real schedule behind the tentative one
    problems, observed = [], {}
    if profile is not None and well.passed:
        for i in range(inst.m):
            for k in range(inst.max_class() + 1):
                vs = remaining_volume(schedule, i, k, horizon)
                vy = tentative_remaining_volume(
                    tentative, {j: inst.job(j).p[tentative[j][0]] for j in tentative},
                    {job.id: job.r for job in inst.jobs}, i, k, horizon,
                )
                gap = max(a - b for a, b in zip(vs, vy))
                if any(a < b for a, b in zip(vs, vy)):
                    problems.append(f"machine {i} class {k}: schedule ahead of tentative")
                observed[f"{i},{k}"] = gap
                if gap > profile.excess[(i, k)]:
                    problems.append(f"machine {i} class {k}: backlog {gap} > {profile.excess[(i, k)]}")
    else:
        problems.append("artifacts malformed")
    report.checks.append(
        Check("backlog", "window excess of class <= k", observed, not problems, "; ".join(problems[:5]))
    )

    # integral flow against fractional flow per machine and class
    problems, observed = [], {}
    if well.passed:
        if not at_most_one_partial_per_class(schedule):
            problems.append("more than one half-done job in a class")
        mt = {row["job"]: row for row in metrics(schedule).per_job}
        for i in range(inst.m):
            on_i = [j for j in schedule.jobs() if schedule.assignment[j] == i]
            load = sum(schedule.size[j] for j in on_i)
            for k in sorted({schedule.klass(j) for j in on_i}):
                members = [j for j in on_i if schedule.klass(j) == k]
                lhs = sum(mt[j]["flow"] for j in members)
                rhs = sum(mt[j]["fractional_flow"] for j in members) + load
                observed[f"{i},{k}"] = [lhs, rhs]
                if lhs > rhs:
                    problems.append(f"machine {i} class {k}: {lhs} > {rhs}")
    else:
        problems.append("artifacts malformed")
    report.checks.append(
        Check("per_class_flow_gap", "sum f + machine load", observed, not problems, "; ".join(problems))
    )

    problems = []
    if well.passed:
        for i in range(inst.m):
            for k in range(inst.max_class() + 1):
                lhs = sum(remaining_volume(schedule, i, k, horizon))
                rhs = sum(
                    t - schedule.release[sl.job]
                    for sl in schedule.machines[i]
                    if schedule.klass(sl.job) == k
                    for t in range(sl.start, sl.end)
                )
                if lhs != rhs:
                    problems.append(f"machine {i} class {k}: {lhs} != {rhs}")
    else:
        problems.append("artifacts malformed")
    report.checks.append(Check("flow_accounting", 0, len(problems), not problems, "; ".join(problems)))
    return report


def _volume_growth_total(inst: Instance, result: TotalFlowResult, T: int) -> list[str]:
    problems = []
    for i in range(inst.m):
        for k in range(inst.max_class() + 1):
            per_round = [_window_sums(v) for v in _total_volume_per_round(inst, result, i, k, T)]
            for ell, pre in enumerate(per_round):
                for t1 in range(T):
                    for t2 in range(t1, T):
                        vol = pre[t2 + 1] - pre[t1]
                        if ell == 0:
                            bound = (t2 - t1) + 8 * 2**k
                        else:
                            old = per_round[ell - 1]
                            bound = old[t2 + 1] - old[t1] + 10 * 2**k
                        if vol > bound:
                            problems.append(
                                f"round {ell} machine {i} class<={k} [{t1},{t2}]: {vol} > {bound}"
                            )
    return problems


# ------------------------------------------------------------------ max flow


def _well_formed_max(inst: Instance, assignment: dict, schedule: Schedule, D: int) -> Check:
    problems = []
    if set(assignment) != {job.id for job in inst.jobs}:
        problems.append("assignment does not cover every job exactly once")
    for j, i in assignment.items():
        try:
            job = inst.job(j)
        except KeyError:
            problems.append(f"unknown job {j}")
            continue
        if not 0 <= i < inst.m or not job.eligible(i) or job.p[i] > D:
            problems.append(f"job {j} on machine {i} is not admissible for D={D}")
        if schedule.assignment.get(j) != i:
            problems.append(f"job {j} runs on {schedule.assignment.get(j)} but is assigned to {i}")
    problems += validate(schedule, inst)
    return Check("well_formed", 0, len(problems), not problems, "; ".join(problems[:5]))


def audit_max(
    inst: Instance, result: MaxFlowResult, assignment: dict, schedule: Schedule, D: int
) -> AuditReport:
    report = AuditReport("max")
    records = result.trace.records
    R = len(records)
    p_max = build_maxflow_lp(inst, D).p_max or 0
    well = _well_formed_max(inst, assignment, schedule, D)
    report.checks.append(well)
    report.checks.append(_halving(inst.n, records, len(assignment)))

    releases = sorted({job.r for job in inst.jobs})
    problems = []
    for i in range(inst.m):
        vols = _max_volume_per_round(inst, records, i)
        for ell, vol in enumerate(vols):
            for a, t1 in enumerate(releases):
                for t2 in releases[a:]:
                    v = sum(x for r, x in vol if t1 <= r <= t2)
                    if ell == 0:
                        bound = (t2 - t1) + D
                    else:
                        bound = sum(x for r, x in vols[ell - 1] if t1 <= r <= t2) + 6 * p_max
                    if v > bound:
                        problems.append(f"round {ell} machine {i} [{t1},{t2}]: {v} > {bound}")
    report.checks.append(
        Check("volume_growth", "6 * p_max per round", len(problems), not problems, "; ".join(problems[:5]))
    )

    excess = volume_check_max(inst, assignment).excess if well.passed else None
    bound = D + 6 * R * p_max
    report.checks.append(
        Check("window_bound", bound, excess, excess is not None and excess <= bound)
    )

    realized = metrics(schedule).max_flow if well.passed else None
    bound = D + (6 * R + 1) * p_max
    report.checks.append(
        Check("realized_max_flow", bound, realized, realized is not None and realized <= bound)
    )

    here = is_feasible(inst, D)
    below = is_feasible(inst, D - 1)
    report.checks.append(
        Check("search_boundary", {"D": True, "D-1": False}, {"D": here, "D-1": below},
              here and not below)
    )
    return report


def _max_volume_per_round(inst: Instance, records, i: int) -> list:
    fixed: list = []
    out = []
    for rec in records:
        cur = list(fixed)
        for (mi, j), x in rec.solution.items():
            if mi == i and x:
                cur.append((inst.job(j).r, x))
        out.append(cur)
        for j, mi in rec.assigned.items():
            if mi == i:
                fixed.append((inst.job(j).r, inst.job(j).p[i]))
    return out


# ------------------------------------------------------------ fault injection

TOTAL_MUTATIONS = ("slot_shift", "slot_delay", "assignment_swap", "round_deletion", "slice_duplicate")
MAX_MUTATIONS = ("assignment_swap", "round_deletion", "lower_D", "slice_duplicate")


def _first_job(inst: Instance) -> int:
    return inst.jobs[0].id


def total_mutations(inst: Instance, result: TotalFlowResult, schedule: Schedule) -> dict:
    """Corrupted copies of a total-flow run, keyed by mutation kind."""
    out = {}
    j = _first_job(inst)
    i, t = result.tentative[j]

    shifted = dict(result.tentative)
    shifted[j] = (i, inst.job(j).r - 1)
    out["slot_shift"] = (copy.deepcopy(result), shifted, schedule)

    slack = result.trace.records[0].objective - tentative_cost(inst, result.tentative)
    delayed = dict(result.tentative)
    delayed[j] = (i, t + math.floor(slack) + 1)
    out["slot_delay"] = (copy.deepcopy(result), delayed, schedule)

    swapped = dict(result.tentative)
    swapped[j] = ((i + 1) % max(inst.m, 2), t)
    out["assignment_swap"] = (copy.deepcopy(result), swapped, schedule)

    trimmed = copy.deepcopy(result)
    del trimmed.trace.records[-1]
    out["round_deletion"] = (trimmed, dict(result.tentative), schedule)

    out["slice_duplicate"] = (copy.deepcopy(result), dict(result.tentative), _duplicate_slice(schedule))
    return out


def max_mutations(inst: Instance, result: MaxFlowResult) -> dict:
    out = {}
    j = _first_job(inst)
    swapped = dict(result.assignment)
    swapped[j] = (swapped[j] + 1) % max(inst.m, 2)
    out["assignment_swap"] = (copy.deepcopy(result), swapped, result.schedule, result.D)

    trimmed = copy.deepcopy(result)
    del trimmed.trace.records[-1]
    out["round_deletion"] = (trimmed, dict(result.assignment), result.schedule, result.D)

    out["lower_D"] = (copy.deepcopy(result), dict(result.assignment), result.schedule, result.D - 1)

    out["slice_duplicate"] = (
        copy.deepcopy(result), dict(result.assignment), _duplicate_slice(result.schedule), result.D
    )
    return out


def _duplicate_slice(schedule: Schedule) -> Schedule:
    s = copy.deepcopy(schedule)
    for ms in s.machines:
        if ms:
            sl = ms[0]
            ms.append(Slice(sl.job, sl.start, sl.end))
            break
    return s


def mutation_battery_total(inst: Instance, result: TotalFlowResult, schedule: Schedule) -> dict:
    """Kind -> True when the audit rejects that corruption."""
    return {
        kind: not audit_total(inst, res, tent, sched).passed
        for kind, (res, tent, sched) in total_mutations(inst, result, schedule).items()
    }


def mutation_battery_max(inst: Instance, result: MaxFlowResult) -> dict:
    return {
        kind: not audit_max(inst, res, assign, sched, D).passed
        for kind, (res, assign, sched, D) in max_mutations(inst, result).items()
    }
