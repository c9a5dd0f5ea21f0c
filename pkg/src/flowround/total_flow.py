"""Total flow-time: interval LP, iterated rounding and schedule assembly.

Variables are triples ``(machine, job, slot)``. A job is fixed once some
variable of it equals its full size; the remaining variables are regrouped
per machine and class into intervals whose capacity is the volume the last
solution put there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import lp as lpmod
from .instance import Instance, class_of
from .lp import GE, LE, BasicSolution, ContractError, LinearProgram
from .schedule import CLASS_SJF, MachineJob, Schedule, simulate

HALF = Fraction(1, 2)


class RoundingError(RuntimeError):
    """An invariant of the rounding loop failed; indicates a solver bug."""


def interval_length(k: int) -> int:
    return 4 * 2**k


@dataclass
class Interval:
    machine: int
    klass: int
    variables: tuple
    size: Fraction


@dataclass
class RoundRecord:
    index: int
    unassigned: int
    assigned: dict
    support: int
    tight_capacity: int
    tight_capacity_all: int
    tight_service: int
    n_variables: int
    n_rows: int
    objective: Fraction
    layout: dict = field(repr=False)
    lp: LinearProgram = field(repr=False)
    solution: dict = field(repr=False)

    def summary(self) -> dict:
        sizes = [iv.size for ivs in self.layout.values() for iv in ivs]
        return {
            "round": self.index,
            "unassigned": self.unassigned,
            "assigned": len(self.assigned),
            "support": self.support,
            "tight_capacity": self.tight_capacity,
            "tight_capacity_all": self.tight_capacity_all,
            "tight_service": self.tight_service,
            "variables": self.n_variables,
            "rows": self.n_rows,
            "intervals": len(sizes),
            "objective": str(self.objective),
        }


@dataclass
class RoundTrace:
    records: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def rounds(self) -> int:
        return len(self.records)

    def unassigned_counts(self) -> list[int]:
        return [rec.unassigned for rec in self.records]

    def to_dict(self) -> dict:
        return {"rounds": [rec.summary() for rec in self.records]}


@dataclass
class TotalFlowResult:
    tentative: dict
    trace: RoundTrace
    lp0_objective: Fraction

    @property
    def rounds(self) -> int:
        return self.trace.rounds


def objective_coefficient(inst: Instance, var) -> Fraction:
    i, j, t = var
    job = inst.job(j)
    return Fraction(t - job.r, job.p[i]) + HALF


def _build_lp(inst: Instance, jobs, variables, layout) -> LinearProgram:
    lp = LinearProgram(list(variables))
    lp.objective = {v: objective_coefficient(inst, v) for v in variables}
    by_job: dict = {j: {} for j in jobs}
    for v in variables:
        i, j, _ = v
        by_job[j][v] = Fraction(1, inst.job(j).p[i])
    for j in jobs:
        lp.add_constraint(by_job[j], GE, 1, ("service", j))
    for (i, k), intervals in sorted(layout.items()):
        for a, iv in enumerate(intervals):
            if iv.variables:
                lp.add_constraint(
                    {v: Fraction(1) for v in iv.variables}, LE, iv.size, ("capacity", i, k, a)
                )
    return lp


def _order(v) -> tuple:
    i, j, t = v
    return (t, j, i)


def build_lp0(inst: Instance) -> tuple[LinearProgram, dict]:
    """The interval relaxation with fixed-width windows per machine and class."""
    T = inst.horizon
    variables = [
        (i, job.id, t)
        for job in inst.jobs
        for i in job.machines()
        for t in range(job.r, T)
    ]
    layout: dict = {}
    for i in range(inst.m):
        for k in range(inst.max_class() + 1):
            length = interval_length(k)
            members = sorted(
                (v for v in variables if v[0] == i and class_of(inst.job(v[1]).p[i]) <= k),
                key=_order,
            )
            groups: dict[int, list] = {}
            for v in members:
                groups.setdefault(v[2] // length, []).append(v)
            layout[(i, k)] = [
                Interval(i, k, tuple(vs), Fraction(length)) for _, vs in sorted(groups.items())
            ]
    lp = _build_lp(inst, [job.id for job in inst.jobs], variables, layout)
    return lp, layout


def _service_jobs(lp: LinearProgram) -> list:
    return [row.name[1] for row in lp.constraints if row.name[0] == "service"]


def _regroup(inst: Instance, variables, values, klasses) -> dict:
    layout: dict = {}
    for i in range(inst.m):
        for k in klasses:
            length = interval_length(k)
            members = sorted(
                (v for v in variables if v[0] == i and class_of(inst.job(v[1]).p[i]) <= k),
                key=_order,
            )
            intervals, current, volume = [], [], Fraction(0)
            for v in members:
                current.append(v)
                volume += values[v]
                if volume >= length:
                    intervals.append(Interval(i, k, tuple(current), volume))
                    current, volume = [], Fraction(0)
            if current:
                # pad the short tail so it behaves like a full interval
                intervals.append(Interval(i, k, tuple(current), max(volume, Fraction(length))))
            layout[(i, k)] = intervals
    return layout


def round_once(
    inst: Instance, lp: LinearProgram, layout: dict, sol: BasicSolution, trace: RoundTrace
) -> tuple[LinearProgram, dict, RoundTrace]:
    """Record ``sol`` for the current round and build the next relaxation."""
    if sol.status != lpmod.OPTIMAL or not lpmod.verify_basic(lp, sol):
        raise ContractError("round_once needs a basic optimal solution")
    values = sol.values
    jobs = _service_jobs(lp)
    support = [v for v in lp.variables if values[v] > 0]

    assigned = {}
    for v in support:
        i, j, t = v
        if j not in assigned and values[v] == inst.job(j).p[i]:
            assigned[j] = (i, t)

    rows = lp.constraints
    cap_rows = [k for k, row in enumerate(rows) if row.name[0] == "capacity"]
    tight_cert = sum(1 for k in sol.tight_rows if rows[k].name[0] == "capacity")
    tight_all = sum(1 for k in cap_rows if rows[k].is_tight(values))
    tight_service = sum(
        1 for k, row in enumerate(rows) if row.name[0] == "service" and row.is_tight(values)
    )
    trace.records.append(
        RoundRecord(
            index=len(trace.records),
            unassigned=len(jobs),
            assigned=assigned,
            support=len(support),
            tight_capacity=tight_cert,
            tight_capacity_all=tight_all,
            tight_service=tight_service,
            n_variables=len(lp.variables),
            n_rows=len(rows),
            objective=sol.objective,
            layout=layout,
            lp=lp,
            solution=dict(values),
        )
    )

    remaining = [j for j in jobs if j not in assigned]
    keep = set(remaining)
    variables = [v for v in support if v[1] in keep]
    klasses = sorted({k for (_, k) in layout})
    new_layout = _regroup(inst, variables, values, klasses)
    new_lp = _build_lp(inst, remaining, variables, new_layout)
    if not new_lp.is_feasible_point({v: values[v] for v in variables}):
        raise RoundingError("previous solution is infeasible for the relaxed program")
    return new_lp, new_layout, trace


def round_cap(n: int) -> int:
    return 2 * math.ceil(math.log2(n)) + 4 if n > 1 else 4


def solve_total(inst: Instance) -> TotalFlowResult:
    """Iterate solve and round until every job sits on one machine and slot."""
    lp, layout = build_lp0(inst)
    trace = RoundTrace()
    cap = round_cap(inst.n)
    while lp.constraints and _service_jobs(lp):
        if trace.rounds >= cap:
            raise RoundingError(f"rounding did not finish within {cap} rounds")
        sol = lpmod.solve_min_basic(lp)
        if sol.status != lpmod.OPTIMAL:
            raise RoundingError(f"relaxation in round {trace.rounds} is {sol.status}")
        lp, layout, trace = round_once(inst, lp, layout, sol, trace)
    tentative = {}
    for rec in trace.records:
        tentative.update(rec.assigned)
    result = TotalFlowResult(tentative, trace, trace.records[0].objective)
    if tentative_cost(inst, tentative) > result.lp0_objective:
        raise RoundingError("rounded cost exceeds the relaxation optimum")
    return result


def tentative_cost(inst: Instance, tentative: dict) -> Fraction:
    total = Fraction(0)
    for j, (i, t) in tentative.items():
        job = inst.job(j)
        total += (t - job.r) + Fraction(job.p[i], 2)
    return total


def tentative_to_schedule(inst: Instance, tentative: dict) -> Schedule:
    """Release each job at its tentative slot and dispatch by class, then slot."""
    machines = []
    for i in range(inst.m):
        batch = [
            MachineJob(j, t, inst.job(j).p[i], class_of(inst.job(j).p[i]))
            for j, (mi, t) in tentative.items()
            if mi == i
        ]
        machines.append(simulate(batch, CLASS_SJF))
    return Schedule.from_slices(inst, machines)


@dataclass
class OverloadProfile:
    excess: dict
    windows: dict

    def normalized(self) -> dict:
        """Worst excess per class, in units of ``2**k``."""
        out: dict = {}
        for (_, k), e in self.excess.items():
            out[k] = max(out.get(k, Fraction(0)), Fraction(e, 2**k))
        return out


def _placed(inst: Instance, tentative: dict, i: int, k: int) -> list[tuple[int, int]]:
    return [
        (t, inst.job(j).p[i])
        for j, (mi, t) in tentative.items()
        if mi == i and inst.job(j).p[i] <= 2**k
    ]


def window_excess(inst: Instance, tentative: dict, i: int, k: int, t1: int, t2: int) -> int:
    """Class <= k volume placed on machine i at slots in [t1, t2], minus t2 - t1."""
    return sum(p for t, p in _placed(inst, tentative, i, k) if t1 <= t <= t2) - (t2 - t1)


def overload_profile(inst: Instance, tentative: dict) -> OverloadProfile:
    """Largest ``volume - (t2 - t1)`` over windows, per machine and class bound."""
    excess, windows = {}, {}
    T = inst.horizon
    for i in range(inst.m):
        for k in range(inst.max_class() + 1):
            items = _placed(inst, tentative, i, k)
            ends = {0, T}
            for t, p in items:
                ends.update((t, t + p))
            ends = sorted(ends)
            best, where = 0, None
            for a, t1 in enumerate(ends):
                for t2 in ends[a:]:
                    vol = sum(p for t, p in items if t1 <= t <= t2)
                    e = vol - (t2 - t1)
                    if e > best or where is None and e == best:
                        best, where = e, (t1, t2)
            excess[(i, k)] = best
            windows[(i, k)] = where
    return OverloadProfile(excess, windows)
