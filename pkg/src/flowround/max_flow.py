"""Maximum flow-time: release-window LP, binary search and FIFO assembly."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import lp as lpmod
from .instance import Instance
from .lp import GE, LE, BasicSolution, ContractError, LinearProgram
from .schedule import FIFO, MachineJob, Schedule, simulate
from .total_flow import RoundingError


@dataclass
class Group:
    machine: int
    variables: tuple
    size: Fraction


@dataclass
class MaxFlowLP:
    D: int
    p_max: int | None
    lp: LinearProgram | None
    missing: tuple = ()

    @property
    def trivially_infeasible(self) -> bool:
        return self.lp is None


@dataclass
class MaxRoundRecord:
    index: int
    unassigned: int
    assigned: dict
    support: int
    tight_capacity: int
    n_variables: int
    n_rows: int
    layout: dict = field(repr=False)
    lp: LinearProgram = field(repr=False)
    solution: dict = field(repr=False)

    def summary(self) -> dict:
        return {
            "round": self.index,
            "unassigned": self.unassigned,
            "assigned": len(self.assigned),
            "support": self.support,
            "tight_capacity": self.tight_capacity,
            "variables": self.n_variables,
            "rows": self.n_rows,
            "groups": sum(len(g) for g in self.layout.values()) if self.layout else None,
        }


@dataclass
class MaxTrace:
    D: int
    p_max: int
    records: list = field(default_factory=list)

    @property
    def rounds(self) -> int:
        return len(self.records)

    def unassigned_counts(self) -> list[int]:
        return [rec.unassigned for rec in self.records]

    def to_dict(self) -> dict:
        return {
            "D": self.D,
            "p_max": self.p_max,
            "rounds": [rec.summary() for rec in self.records],
        }


@dataclass
class MaxFlowResult:
    assignment: dict
    D: int
    trace: MaxTrace
    schedule: Schedule

    @property
    def rounds(self) -> int:
        return self.trace.rounds

    @property
    def p_max(self) -> int:
        return self.trace.p_max


def admissible_p_max(inst: Instance, D: int) -> int | None:
    sizes = [x for x in inst.finite_sizes() if x <= D]
    return max(sizes) if sizes else None


def _service_rows(lp: LinearProgram, inst: Instance, jobs, variables) -> None:
    by_job: dict = {j: {} for j in jobs}
    for v in variables:
        i, j = v
        by_job[j][v] = Fraction(1, inst.job(j).p[i])
    for j in jobs:
        lp.add_constraint(by_job[j], GE, 1, ("service", j))


def build_maxflow_lp(inst: Instance, D: int) -> MaxFlowLP:
    """Service rows plus one capacity row per machine and release-time window."""
    variables = [
        (i, job.id) for job in inst.jobs for i in job.machines() if job.p[i] <= D
    ]
    covered = {j for _, j in variables}
    missing = tuple(job.id for job in inst.jobs if job.id not in covered)
    p_max = admissible_p_max(inst, D)
    if missing:
        return MaxFlowLP(D, p_max, None, missing)
    lp = LinearProgram(variables)
    # unit costs keep every service row tight at an optimum
    lp.objective = {v: Fraction(1) for v in variables}
    _service_rows(lp, inst, [job.id for job in inst.jobs], variables)
    releases = sorted({job.r for job in inst.jobs})
    for i in range(inst.m):
        on_i = [(inst.job(j).r, (i, j)) for (mi, j) in variables if mi == i]
        for a, t in enumerate(releases):
            for t2 in releases[a:]:
                row = {v: Fraction(1) for r, v in on_i if t <= r <= t2}
                if row:
                    lp.add_constraint(row, LE, (t2 - t) + D, ("capacity", i, t, t2))
    return MaxFlowLP(D, p_max, lp)


def is_feasible(inst: Instance, D: int) -> bool:
    mlp = build_maxflow_lp(inst, D)
    if mlp.trivially_infeasible:
        return False
    return lpmod.solve_feasible_basic(mlp.lp).status == lpmod.FEASIBLE


def search_bounds(inst: Instance) -> tuple[int, int]:
    lo = max(job.min_p() for job in inst.jobs)
    hi = max(job.r for job in inst.jobs) + sum(job.min_p() for job in inst.jobs)
    return lo, hi


def binary_search_D(inst: Instance) -> tuple[int, BasicSolution]:
    """Smallest integer D whose relaxation is feasible, with an optimal vertex there."""
    lo, hi = search_bounds(inst)
    if not is_feasible(inst, hi):
        raise RoundingError(f"relaxation infeasible at the trivial bound D={hi}")
    while lo < hi:
        mid = (lo + hi) // 2
        if is_feasible(inst, mid):
            hi = mid
        else:
            lo = mid + 1
    if is_feasible(inst, lo - 1):
        raise RoundingError(f"feasibility is not monotone around D={lo}")
    sol = lpmod.solve_min_basic(build_maxflow_lp(inst, lo).lp)
    return lo, sol


def _regroup(inst: Instance, variables, values, p_max: int) -> dict:
    threshold = 2 * p_max
    layout: dict = {}
    for i in range(inst.m):
        members = sorted(
            (v for v in variables if v[0] == i), key=lambda v: (inst.job(v[1]).r, v[1])
        )
        groups, current, volume = [], [], Fraction(0)
        for v in members:
            current.append(v)
            volume += values[v]
            if volume >= threshold:
                groups.append(Group(i, tuple(current), volume))
                current, volume = [], Fraction(0)
        if current:
            groups.append(Group(i, tuple(current), max(volume, Fraction(threshold))))
        layout[i] = groups
    return layout


def _build_round_lp(inst: Instance, jobs, variables, layout) -> LinearProgram:
    lp = LinearProgram(list(variables))
    lp.objective = {v: Fraction(1) for v in variables}
    _service_rows(lp, inst, jobs, variables)
    for i, groups in sorted(layout.items()):
        for a, g in enumerate(groups):
            lp.add_constraint({v: Fraction(1) for v in g.variables}, LE, g.size, ("capacity", i, a))
    return lp


def round_once_max(
    inst: Instance, lp: LinearProgram, layout: dict | None, sol: BasicSolution, trace: MaxTrace
) -> tuple[LinearProgram, dict, MaxTrace]:
    """Fix integral jobs from ``sol``, regroup the rest, return the next program."""
    if sol.status not in (lpmod.OPTIMAL, lpmod.FEASIBLE) or not lpmod.verify_basic(lp, sol):
        raise ContractError("round_once_max needs a basic feasible solution")
    values = sol.values
    rows = lp.constraints
    jobs = [row.name[1] for row in rows if row.name[0] == "service"]
    support = [v for v in lp.variables if values[v] > 0]
    assigned = {}
    for v in support:
        i, j = v
        if j not in assigned and values[v] == inst.job(j).p[i]:
            assigned[j] = i
    trace.records.append(
        MaxRoundRecord(
            index=trace.rounds,
            unassigned=len(jobs),
            assigned=assigned,
            support=len(support),
            tight_capacity=sum(1 for k in sol.tight_rows if rows[k].name[0] == "capacity"),
            n_variables=len(lp.variables),
            n_rows=len(rows),
            layout=layout,
            lp=lp,
            solution=dict(values),
        )
    )
    remaining = [j for j in jobs if j not in assigned]
    keep = set(remaining)
    variables = [v for v in support if v[1] in keep]
    new_layout = _regroup(inst, variables, values, trace.p_max)
    new_lp = _build_round_lp(inst, remaining, variables, new_layout)
    if not new_lp.is_feasible_point({v: values[v] for v in variables}):
        raise RoundingError("previous solution is infeasible for the relaxed program")
    return new_lp, new_layout, trace


def round_cap(n: int) -> int:
    return 2 * math.ceil(math.log2(n)) + 4 if n > 1 else 4


def solve_max(inst: Instance) -> MaxFlowResult:
    D, sol = binary_search_D(inst)
    mlp = build_maxflow_lp(inst, D)
    lp, layout = mlp.lp, None
    trace = MaxTrace(D, mlp.p_max)
    cap = round_cap(inst.n)
    while any(row.name[0] == "service" for row in lp.constraints):
        if trace.rounds >= cap:
            raise RoundingError(f"rounding did not finish within {cap} rounds")
        if trace.rounds:
            sol = lpmod.solve_min_basic(lp)
        if sol.status != lpmod.OPTIMAL:
            raise RoundingError(f"relaxation in round {trace.rounds} is {sol.status}")
        lp, layout, trace = round_once_max(inst, lp, layout, sol, trace)
    assignment = {}
    for rec in trace.records:
        assignment.update(rec.assigned)
    return MaxFlowResult(assignment, D, trace, fifo_schedule(inst, assignment))


def fifo_schedule(inst: Instance, assignment: dict) -> Schedule:
    machines = []
    for i in range(inst.m):
        batch = [
            MachineJob(j, inst.job(j).r, inst.job(j).p[i])
            for j, mi in assignment.items()
            if mi == i
        ]
        machines.append(simulate(batch, FIFO))
    return Schedule.from_slices(inst, machines)


@dataclass
class WindowExcess:
    excess: int
    machine: int | None
    window: tuple | None
    per_machine: dict


def volume_check_max(inst: Instance, assignment: dict) -> WindowExcess:
    """Largest ``sum p - (t2 - t1)`` over release-time windows on one machine."""
    releases = sorted({job.r for job in inst.jobs})
    best = WindowExcess(0, None, None, {})
    for i in range(inst.m):
        items = [(inst.job(j).r, inst.job(j).p[i]) for j, mi in assignment.items() if mi == i]
        top, where = None, None
        for a, t1 in enumerate(releases):
            for t2 in releases[a:]:
                e = sum(p for r, p in items if t1 <= r <= t2) - (t2 - t1)
                if top is None or e > top:
                    top, where = e, (t1, t2)
        best.per_machine[i] = top
        if best.machine is None or top > best.excess:
            best.excess, best.machine, best.window = top, i, where
    return best
