"""Unit-slot preemptive schedules, dispatch simulators and flow metrics."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple

from .instance import Instance, class_of

SRPT = "SRPT"
CLASS_SJF = "CLASS_SJF"
FIFO = "FIFO"
POLICIES = (SRPT, CLASS_SJF, FIFO)


class MachineJob(NamedTuple):
    id: int
    available: int
    p: int
    klass: int = 0


@dataclass(frozen=True)
class Slice:
    job: int
    start: int
    end: int

    def __len__(self) -> int:
        return self.end - self.start


def simulate(jobs: Iterable[MachineJob], policy: str) -> list[Slice]:
    """Run one machine slot by slot under ``policy``.

    The machine never idles while an available job is unfinished. Ties go to
    class, then availability, then id.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    jobs = sorted(jobs, key=lambda j: (j.available, j.id))
    remaining = {j.id: j.p for j in jobs}
    slots: list[tuple[int, int]] = []
    pending = list(jobs)
    alive: list[MachineJob] = []
    t = 0
    while pending or alive:
        while pending and pending[0].available <= t:
            alive.append(pending.pop(0))
        if not alive:
            t = pending[0].available
            continue
        if policy == SRPT:
            key = lambda j: (remaining[j.id], j.klass, j.available, j.id)
        elif policy == CLASS_SJF:
            key = lambda j: (j.klass, j.available, j.id)
        else:
            key = lambda j: (j.available, j.id)
        run = min(alive, key=key)
        slots.append((t, run.id))
        remaining[run.id] -= 1
        if remaining[run.id] == 0:
            alive.remove(run)
        t += 1
    return _merge(slots)


def _merge(slots: list[tuple[int, int]]) -> list[Slice]:
    out: list[Slice] = []
    for t, job in slots:
        if out and out[-1].job == job and out[-1].end == t:
            out[-1] = Slice(job, out[-1].start, t + 1)
        else:
            out.append(Slice(job, t, t + 1))
    return out


@dataclass
class Schedule:
    """Per-machine slices plus the job data the metrics need."""

    m: int
    machines: list = field(default_factory=list)
    release: dict = field(default_factory=dict)
    size: dict = field(default_factory=dict)
    assignment: dict = field(default_factory=dict)

    @classmethod
    def from_slices(cls, inst: Instance, machines: list[list[Slice]]) -> "Schedule":
        s = cls(inst.m, [list(ms) for ms in machines])
        for i, ms in enumerate(s.machines):
            for sl in ms:
                job = inst.job(sl.job)
                s.release[sl.job] = job.r
                s.size[sl.job] = job.p[i]
                s.assignment[sl.job] = i
        return s

    def slices_of(self, job: int) -> list[Slice]:
        return [sl for sl in self.machines[self.assignment[job]] if sl.job == job]

    def completion(self, job: int) -> int:
        return max(sl.end for sl in self.slices_of(job))

    def flow(self, job: int) -> int:
        return self.completion(job) - self.release[job]

    def fractional_flow(self, job: int) -> Fraction:
        r, p = self.release[job], self.size[job]
        total = sum(t - r for sl in self.slices_of(job) for t in range(sl.start, sl.end))
        return Fraction(total, p)

    def jobs(self) -> list[int]:
        return sorted(self.assignment)

    def klass(self, job: int) -> int:
        return class_of(self.size[job])

    def to_dict(self) -> dict:
        return {
            "machines": [
                [{"job": sl.job, "start": sl.start, "end": sl.end} for sl in ms]
                for ms in self.machines
            ]
        }


@dataclass
class Metrics:
    total_flow: int
    max_flow: int
    total_fractional_flow: Fraction
    per_job: list


def metrics(s: Schedule) -> Metrics:
    rows = []
    for j in s.jobs():
        rows.append(
            {
                "job": j,
                "machine": s.assignment[j],
                "release": s.release[j],
                "p": s.size[j],
                "completion": s.completion(j),
                "flow": s.flow(j),
                "fractional_flow": s.fractional_flow(j),
            }
        )
    return Metrics(
        total_flow=sum(r["flow"] for r in rows),
        max_flow=max((r["flow"] for r in rows), default=0),
        total_fractional_flow=sum((r["fractional_flow"] for r in rows), Fraction(0)),
        per_job=rows,
    )


def validate(s: Schedule, inst: Instance) -> list[str]:
    """Every way ``s`` breaks the schedule invariants against ``inst``."""
    problems = []
    if len(s.machines) != inst.m:
        problems.append(f"schedule has {len(s.machines)} machines, instance has {inst.m}")
    work: dict[int, dict[int, int]] = {}
    for i, ms in enumerate(s.machines):
        busy: dict[int, int] = {}
        for sl in ms:
            if sl.end <= sl.start:
                problems.append(f"machine {i}: empty or reversed slice {sl}")
                continue
            try:
                job = inst.job(sl.job)
            except KeyError:
                problems.append(f"machine {i}: unknown job {sl.job}")
                continue
            if sl.start < job.r:
                problems.append(f"job {sl.job} started at {sl.start} before release {job.r}")
            for t in range(sl.start, sl.end):
                if t in busy:
                    problems.append(f"machine {i} busy twice at slot {t} (jobs {busy[t]}, {sl.job})")
                busy[t] = sl.job
            work.setdefault(sl.job, {}).setdefault(i, 0)
            work[sl.job][i] += len(sl)
    for job in inst.jobs:
        done = work.get(job.id, {})
        if not done:
            problems.append(f"job {job.id} never processed")
            continue
        if len(done) > 1:
            problems.append(f"job {job.id} migrates across machines {sorted(done)}")
        for i, units in done.items():
            if not job.eligible(i):
                problems.append(f"job {job.id} runs on ineligible machine {i}")
            elif units != job.p[i]:
                problems.append(f"job {job.id} gets {units} units on machine {i}, needs {job.p[i]}")
    return problems


def remaining_volume(s: Schedule, machine: int, klass: int, horizon: int) -> list[int]:
    """Work of released class-``klass`` jobs on ``machine`` still left after each slot."""
    vol = [0] * horizon
    for sl in s.machines[machine]:
        if s.klass(sl.job) != klass:
            continue
        r = s.release[sl.job]
        for t_run in range(sl.start, sl.end):
            for t in range(r, min(t_run, horizon)):
                vol[t] += 1
    return vol


def tentative_remaining_volume(
    tentative: dict, sizes: dict, release: dict, machine: int, klass: int, horizon: int
) -> list[int]:
    """Same quantity for a tentative assignment ``job -> (machine, slot)``."""
    vol = [0] * horizon
    for j, (i, t_star) in tentative.items():
        if i != machine or class_of(sizes[j]) != klass:
            continue
        for t in range(release[j], min(t_star, horizon)):
            vol[t] += sizes[j]
    return vol


def at_most_one_partial_per_class(s: Schedule) -> bool:
    """After every slot, each machine holds at most one half-done job per class."""
    for ms in s.machines:
        runs = sorted((t, sl.job) for sl in ms for t in range(sl.start, sl.end))
        done: dict[int, int] = {}
        partial: dict[int, set] = {}
        for _, j in runs:
            done[j] = done.get(j, 0) + 1
            bucket = partial.setdefault(s.klass(j), set())
            if done[j] < s.size[j]:
                bucket.add(j)
            else:
                bucket.discard(j)
            if len(bucket) > 1:
                return False
    return True
