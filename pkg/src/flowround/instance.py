"""Scheduling instances: jobs with release slots and machine-dependent sizes."""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from pathlib import Path
from typing import Sequence

# ineligible (job, machine) pairs are stored as None
INELIGIBLE = None


class InstanceError(ValueError):
    """Raised for malformed or invalid instance data."""


@dataclass(frozen=True)
class Job:
    id: int
    r: int
    p: tuple

    def eligible(self, i: int) -> bool:
        return self.p[i] is not INELIGIBLE

    def machines(self) -> list[int]:
        return [i for i, x in enumerate(self.p) if x is not INELIGIBLE]

    def min_p(self) -> int:
        return min(x for x in self.p if x is not INELIGIBLE)

    def max_p(self) -> int:
        return max(x for x in self.p if x is not INELIGIBLE)


@dataclass(frozen=True)
class Instance:
    m: int
    jobs: tuple

    def __post_init__(self):
        object.__setattr__(self, "jobs", tuple(sorted(self.jobs, key=lambda j: (j.r, j.id))))
        _validate(self)

    @property
    def n(self) -> int:
        return len(self.jobs)

    @property
    def horizon(self) -> int:
        """Slot count T; every slot a non-migratory busy-when-possible schedule uses is < T."""
        return max(j.r for j in self.jobs) + sum(j.max_p() for j in self.jobs)

    @cached_property
    def _by_id(self) -> dict:
        return {j.id: j for j in self.jobs}

    def job(self, job_id: int) -> Job:
        return self._by_id[job_id]

    def finite_sizes(self) -> list[int]:
        return [x for j in self.jobs for x in j.p if x is not INELIGIBLE]

    @property
    def size_ratio(self) -> Fraction:
        sizes = self.finite_sizes()
        return Fraction(max(sizes), min(sizes))

    def max_class(self) -> int:
        return class_of(max(self.finite_sizes()))

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "jobs": [{"id": j.id, "r": j.r, "p": list(j.p)} for j in self.jobs],
        }


def _validate(inst: Instance) -> None:
    if not isinstance(inst.m, int) or inst.m < 1:
        raise InstanceError("instance needs at least one machine")
    if not inst.jobs:
        raise InstanceError("instance needs at least one job")
    seen = set()
    for j in inst.jobs:
        if j.id in seen:
            raise InstanceError(f"duplicate job id {j.id}")
        seen.add(j.id)
        if not isinstance(j.r, int) or isinstance(j.r, bool) or j.r < 0:
            raise InstanceError(f"job {j.id}: release must be a non-negative integer")
        if len(j.p) != inst.m:
            raise InstanceError(f"job {j.id}: expected {inst.m} processing times, got {len(j.p)}")
        for x in j.p:
            if x is INELIGIBLE:
                continue
            if not isinstance(x, int) or isinstance(x, bool) or x < 1:
                raise InstanceError(f"job {j.id}: processing times must be positive integers or null")
        if all(x is INELIGIBLE for x in j.p):
            raise InstanceError(f"job {j.id}: job has no eligible machine")


def make_instance(m: int, rows: Sequence) -> Instance:
    """Build from ``(r, p)`` pairs; ids are assigned in the given order."""
    return Instance(m, tuple(Job(k, r, tuple(p)) for k, (r, p) in enumerate(rows)))


def class_of(p: int) -> int:
    """Smallest ``k >= 0`` with ``p <= 2**k``."""
    if p < 1:
        raise ValueError("size must be at least 1")
    return (p - 1).bit_length()


def from_dict(data: dict) -> Instance:
    try:
        m = data["m"]
        jobs = tuple(Job(d["id"], d["r"], tuple(d["p"])) for d in data["jobs"])
    except (KeyError, TypeError) as exc:
        raise InstanceError(f"malformed instance: {exc}") from exc
    return Instance(m, jobs)


def load(path) -> Instance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: not valid JSON ({exc})") from exc
    return from_dict(data)


def dumps(inst: Instance) -> str:
    return json.dumps(inst.to_dict(), indent=2) + "\n"


def save(inst: Instance, path) -> None:
    Path(path).write_text(dumps(inst))


def normalize(inst: Instance) -> tuple[Instance, Fraction]:
    """Divide every size by the smallest one, if that keeps them integral."""
    scale = min(inst.finite_sizes())
    if scale == 1:
        return inst, Fraction(1)
    jobs = []
    for j in inst.jobs:
        p = []
        for x in j.p:
            if x is not INELIGIBLE:
                if x % scale:
                    raise InstanceError(
                        f"job {j.id}: size {x} is not a multiple of {scale}; pre-scale the input"
                    )
                x //= scale
            p.append(x)
        jobs.append(Job(j.id, j.r, tuple(p)))
    return Instance(inst.m, tuple(jobs)), Fraction(scale)


def preprocess_small_jobs(inst: Instance, p_max_guess: int) -> Instance:
    """Raise every size below ``p_max_guess / n**2`` up to its ceiling."""
    n = inst.n
    floor_size = Fraction(p_max_guess, n * n)
    raised = math.ceil(floor_size)
    jobs = []
    for j in inst.jobs:
        p = tuple(
            raised if x is not INELIGIBLE and x < floor_size else x for x in j.p
        )
        jobs.append(Job(j.id, j.r, p))
    out = Instance(inst.m, tuple(jobs))
    sizes = [x for x in out.finite_sizes() if x <= p_max_guess]
    if sizes and Fraction(max(sizes), min(sizes)) > n * n:
        raise AssertionError("preprocessing left a size ratio above n^2")
    return out


def p_max_candidates(inst: Instance) -> list[int]:
    return sorted(set(inst.finite_sizes()))


def generate_random(
    n: int, m: int, p_max: int, r_max: int, density: float, seed: int
) -> Instance:
    if n < 1 or m < 1:
        raise ValueError("n and m must be at least 1")
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    if p_max < 1 or r_max < 0:
        raise ValueError("need p_max >= 1 and r_max >= 0")
    rng = random.Random(seed)
    jobs = []
    for k in range(n):
        r = rng.randint(0, r_max)
        p = [rng.randint(1, p_max) if rng.random() < density else INELIGIBLE for _ in range(m)]
        if all(x is INELIGIBLE for x in p):
            p[rng.randrange(m)] = rng.randint(1, p_max)
        jobs.append(Job(k, r, tuple(p)))
    return Instance(m, tuple(jobs))
