"""Independent oracles and fixtures shared by the test modules."""
from __future__ import annotations

import itertools
import json
import random
from fractions import Fraction
from importlib import resources

from gmpy2 import mpq
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from flowround.instance import generate_random, make_instance
from flowround.lp import GE, LE, LinearProgram

N = None


# --------------------------------------------------------------- LP oracle


def _solve_square(rows: list, rhs: list):
    """Exact Gauss-Jordan; None when singular."""
    n = len(rows)
    a = [list(r) + [b] for r, b in zip(rows, rhs)]
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return None
        a[c], a[piv] = a[piv], a[c]
        inv = 1 / a[c][c]
        a[c] = [x * inv for x in a[c]]
        for r in range(n):
            if r != c and a[r][c] != 0:
                f = a[r][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return [a[r][n] for r in range(n)]


def vertices(lp: LinearProgram) -> list[dict]:
    """Every vertex of ``{x >= 0} ∩ rows``, by support and tight-row enumeration."""
    names = lp.variables
    rows = lp.constraints
    dense = [[mpq(r.coeffs.get(v, 0)) for v in names] for r in rows]
    rhs = [mpq(r.rhs) for r in rows]
    col = {v: c for c, v in enumerate(names)}
    found = []
    for s in range(0, min(len(names), len(rows)) + 1):
        for support in itertools.combinations(names, s):
            for tight in itertools.combinations(range(len(rows)), s):
                if s:
                    mat = [[dense[r][col[v]] for v in support] for r in tight]
                    sol = _solve_square(mat, [rhs[r] for r in tight])
                    if sol is None or any(x < 0 for x in sol):
                        continue
                else:
                    sol = []
                point = {v: Fraction(0) for v in names}
                point.update((v, Fraction(int(x.numerator), int(x.denominator))) for v, x in zip(support, sol))
                if lp.is_feasible_point(point):
                    found.append(point)
    return found


def brute_force_min(lp: LinearProgram):
    """Exact minimum over all vertices, or None when infeasible."""
    pts = vertices(lp)
    if not pts:
        return None
    return min(lp.objective_value(p) for p in pts)


def random_lp(rng: random.Random, max_vars: int = 8, max_rows: int = 8) -> LinearProgram:
    """A random LP that is bounded below whenever it is feasible."""
    nv = rng.randint(1, max_vars)
    nr = rng.randint(1, max_rows)
    names = [f"x{k}" for k in range(nv)]
    lp = LinearProgram(names)
    bounded_box = rng.random() < 0.5
    if bounded_box:
        lp.objective = {v: Fraction(rng.randint(-4, 4)) for v in names}
        lp.add_constraint({v: Fraction(1) for v in names}, LE, Fraction(rng.randint(1, 9)))
        nr -= 1
    else:
        lp.objective = {v: Fraction(rng.randint(0, 4)) for v in names}
    for _ in range(nr):
        coeffs = {}
        for v in names:
            if rng.random() < 0.6:
                coeffs[v] = Fraction(rng.randint(-3, 4), rng.choice([1, 1, 2, 3]))
        if not coeffs:
            coeffs[rng.choice(names)] = Fraction(1)
        sense = rng.choice([LE, GE])
        lp.add_constraint(coeffs, sense, Fraction(rng.randint(-2, 6), rng.choice([1, 2])))
    return lp


# ------------------------------------------------------------------ schemas


def validator(name: str) -> Draft202012Validator:
    folder = resources.files("flowround") / "schemas"
    resources_ = []
    for f in folder.iterdir():
        if f.name.endswith(".schema.json"):
            resources_.append((f.name, Resource.from_contents(json.loads(f.read_text()))))
    registry = Registry().with_resources(resources_)
    schema = json.loads((folder / f"{name}.schema.json").read_text())
    return Draft202012Validator(schema, registry=registry)


# -------------------------------------------------------------- instances


def desk_grid():
    """The acceptance grid: 640 seeded random instances."""
    out = []
    for n, m, p, r, d, seed in itertools.product(
        (2, 3, 4, 5), (1, 2), (2, 4), (0, 4), (1.0, 0.7), range(10)
    ):
        out.append((f"n{n}_m{m}_p{p}_r{r}_d{d}_s{seed}", generate_random(n, m, p, r, d, seed)))
    return out


def edge_cases():
    """Twenty hand-written instances covering boundaries the generator rarely hits."""
    cases = {
        "one_unit_job": (1, [(0, [1])]),
        "one_job_two_machines": (2, [(0, [2, 5])]),
        "srpt_pair": (1, [(0, [3]), (1, [1])]),
        "fifo_pair": (1, [(0, [2]), (1, [2])]),
        "five_units_same_release": (1, [(0, [1])] * 5),
        "five_units_two_machines": (2, [(0, [1, 1])] * 5),
        "disjoint_eligibility": (2, [(0, [N, 3]), (0, [2, N]), (1, [N, 1])]),
        "release_gaps": (1, [(0, [2]), (10, [2]), (20, [3])]),
        "all_classes": (1, [(0, [1]), (0, [2]), (0, [4]), (0, [8])]),
        "big_versus_unit": (2, [(0, [8, 1]), (0, [8, 1]), (1, [1, 8])]),
        "staircase": (1, [(t, [1]) for t in range(5)]),
        "three_machines": (3, [(0, [1, 2, 3]), (1, [3, 1, 2]), (1, [2, 3, 1]), (2, [1, 1, 4])]),
        "preferred_machine": (2, [(0, [1, 4])] * 4),
        "six_units_two_machines": (2, [(0, [1, 1])] * 6),
        "seven_mixed": (2, [(0, [1, 2]), (0, [2, 1]), (1, [3, 3]), (1, [1, 4]),
                            (2, [4, 1]), (3, [2, 2]), (3, [1, 1])]),
        "eight_beyond_cap": (2, [(t % 3, [1 + t % 2, 2 - t % 2]) for t in range(8)]),
        "size_three": (1, [(0, [3]), (0, [3]), (2, [3])]),
        "pile_on_one_machine": (1, [(0, [4]), (0, [4]), (0, [1]), (0, [2])]),
        "single_eligible_of_three": (3, [(0, [N, N, 2]), (0, [1, 1, 1]), (1, [N, 3, N])]),
        "late_releases": (2, [(5, [2, 1]), (5, [1, 2]), (6, [2, 2])]),
    }
    return [(name, make_instance(m, rows)) for name, (m, rows) in cases.items()]
