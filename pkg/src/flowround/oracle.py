"""Brute-force optima for tiny instances.

Non-migratory schedules decompose into a job-to-machine assignment plus one
single-machine schedule per machine, and SRPT (total flow) and FIFO (max
flow) are optimal on a single machine. Enumerating assignments therefore
gives exact optima. :func:`exhaustive_single_machine` searches the whole
unit-slot schedule space and exists to check that reduction.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from .instance import Instance
from .schedule import FIFO, SRPT, MachineJob, Schedule, metrics, simulate

DEFAULT_CAP = 7


class OracleSizeError(ValueError):
    """The instance is too large for exhaustive enumeration."""


@dataclass
class OracleResult:
    value: int
    assignment: dict
    schedule: Schedule


def assignments(inst: Instance):
    choices = [job.machines() for job in inst.jobs]
    ids = [job.id for job in inst.jobs]
    for combo in itertools.product(*choices):
        yield dict(zip(ids, combo))


def _schedule(inst: Instance, assignment: dict, policy: str) -> Schedule:
    machines = []
    for i in range(inst.m):
        batch = [
            MachineJob(j, inst.job(j).r, inst.job(j).p[i])
            for j, mi in assignment.items()
            if mi == i
        ]
        machines.append(simulate(batch, policy))
    return Schedule.from_slices(inst, machines)


def _search(inst: Instance, cap: int, policy: str, objective) -> OracleResult:
    if inst.n > cap:
        raise OracleSizeError(f"{inst.n} jobs exceeds the oracle cap of {cap}")
    best = None
    for a in assignments(inst):
        s = _schedule(inst, a, policy)
        value = objective(metrics(s))
        if best is None or value < best.value:
            best = OracleResult(value, a, s)
    return best


def oracle_total(inst: Instance, cap: int = DEFAULT_CAP) -> OracleResult:
    return _search(inst, cap, SRPT, lambda mt: mt.total_flow)


def oracle_max(inst: Instance, cap: int = DEFAULT_CAP) -> OracleResult:
    return _search(inst, cap, FIFO, lambda mt: mt.max_flow)


def exhaustive_single_machine(jobs: list[tuple[int, int]], objective: str) -> int:
    """Optimal total or max flow over every unit-slot preemptive schedule.

    ``jobs`` is a list of ``(release, size)``. Idling is allowed at every slot.
    """
    if objective not in ("total", "max"):
        raise ValueError(objective)
    release = tuple(r for r, _ in jobs)
    horizon = max(release, default=0) + sum(p for _, p in jobs)

    @lru_cache(maxsize=None)
    def best(t: int, rem: tuple) -> int:
        if not any(rem):
            return 0
        if t >= horizon:
            return 10**9
        alive = [k for k, x in enumerate(rem) if x and release[k] <= t]
        if objective == "total":
            options = [best(t + 1, rem)]
            for k in alive:
                nxt = rem[:k] + (rem[k] - 1,) + rem[k + 1 :]
                options.append(best(t + 1, nxt))
            return len(alive) + min(options)
        options = [best(t + 1, rem)]
        for k in alive:
            nxt = rem[:k] + (rem[k] - 1,) + rem[k + 1 :]
            done = t + 1 - release[k] if nxt[k] == 0 else 0
            options.append(max(done, best(t + 1, nxt)))
        return min(options)

    return best(0, tuple(p for _, p in jobs))


def exhaustive_optimum(inst: Instance, objective: str, cap: int = 3) -> int:
    """Assignment enumeration paired with full single-machine search."""
    if inst.n > cap:
        raise OracleSizeError(f"{inst.n} jobs exceeds the exhaustive cap of {cap}")
    best = None
    for a in assignments(inst):
        parts = []
        for i in range(inst.m):
            jobs = [(inst.job(j).r, inst.job(j).p[i]) for j, mi in a.items() if mi == i]
            parts.append(exhaustive_single_machine(jobs, objective))
        value = sum(parts) if objective == "total" else max(parts)
        if best is None or value < best:
            best = value
    return best
