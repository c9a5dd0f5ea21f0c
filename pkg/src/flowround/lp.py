"""Exact rational simplex returning vertex solutions.

The solver works on a sparse tableau over ``gmpy2.mpq`` and uses Bland's
smallest-index rule in both phases, so every call is deterministic and
terminates. Results are handed back as :class:`fractions.Fraction` values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Mapping

from gmpy2 import mpq

LE = "<="
GE = ">="

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"


class UnboundedError(RuntimeError):
    """The objective is unbounded below over the feasible region."""


class ContractError(RuntimeError):
    """A solution handed to a consumer does not satisfy its contract."""


@dataclass
class Constraint:
    coeffs: dict
    sense: str
    rhs: Fraction
    name: Hashable = None

    def activity(self, values: Mapping) -> Fraction:
        return sum((c * values.get(v, 0) for v, c in self.coeffs.items()), Fraction(0))

    def satisfied(self, values: Mapping) -> bool:
        lhs = self.activity(values)
        return lhs <= self.rhs if self.sense == LE else lhs >= self.rhs

    def is_tight(self, values: Mapping) -> bool:
        return self.activity(values) == self.rhs


@dataclass
class LinearProgram:
    """``min objective . x`` subject to the rows and ``x >= 0``."""

    variables: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)

    def add_constraint(self, coeffs, sense, rhs, name=None) -> int:
        if sense not in (LE, GE):
            raise ValueError(f"unknown sense {sense!r}")
        self.constraints.append(Constraint(dict(coeffs), sense, Fraction(rhs), name))
        return len(self.constraints) - 1

    def validate(self) -> None:
        declared = set(self.variables)
        if len(declared) != len(self.variables):
            raise ValueError("duplicate variable ids")
        for v in self.objective:
            if v not in declared:
                raise ValueError(f"objective references undeclared variable {v!r}")
        for k, row in enumerate(self.constraints):
            for v in row.coeffs:
                if v not in declared:
                    raise ValueError(f"row {k} references undeclared variable {v!r}")

    def objective_value(self, values: Mapping) -> Fraction:
        return sum((c * values.get(v, 0) for v, c in self.objective.items()), Fraction(0))

    def is_feasible_point(self, values: Mapping) -> bool:
        if any(values.get(v, 0) < 0 for v in self.variables):
            return False
        return all(row.satisfied(values) for row in self.constraints)

    def dump(self) -> str:
        """Plain-text rendering for troubleshooting."""
        lines = ["min " + " + ".join(f"{c}*{v}" for v, c in self.objective.items())]
        for k, row in enumerate(self.constraints):
            lhs = " + ".join(f"{c}*{v}" for v, c in row.coeffs.items()) or "0"
            lines.append(f"  [{k}] {row.name}: {lhs} {row.sense} {row.rhs}")
        return "\n".join(lines)


@dataclass
class BasicSolution:
    status: str
    values: dict = field(default_factory=dict)
    tight_rows: tuple = ()
    tight_bounds: tuple = ()
    objective: Fraction | None = None
    pivots: int = 0

    @property
    def tight_set(self) -> tuple:
        return tuple(("row", k) for k in self.tight_rows) + tuple(
            ("bound", v) for v in self.tight_bounds
        )

    def support(self) -> list:
        return [v for v, x in self.values.items() if x != 0]


def _q(x) -> mpq:
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    return mpq(x)


def _frac(x: mpq) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


class _Tableau:
    """Sparse dictionary tableau; row ``r`` reads ``sum coeffs = rhs[r]``.

    Each row stores its basic column explicitly with coefficient 1.
    """

    def __init__(self, rows, rhs, basis):
        self.rows = rows
        self.rhs = rhs
        self.basis = basis
        self.pivots = 0

    def pivot(self, r: int, e: int, zrows) -> None:
        row = self.rows[r]
        a = row[e]
        if a != 1:
            inv = 1 / a
            for c in row:
                row[c] *= inv
            self.rhs[r] *= inv
        beta = self.rhs[r]
        items = list(row.items())
        for i, other in enumerate(self.rows):
            if i == r:
                continue
            f = other.get(e)
            if not f:
                continue
            self._axpy(other, items, f)
            if beta:
                self.rhs[i] -= f * beta
        for z in zrows:
            f = z.coeffs.get(e)
            if not f:
                continue
            self._axpy(z.coeffs, items, f)
            z.value += f * beta
        self.basis[r] = e
        self.pivots += 1

    @staticmethod
    def _axpy(target: dict, items, f) -> None:
        for c, v in items:
            new = target.get(c, 0) - f * v
            if new:
                target[c] = new
            else:
                target.pop(c, None)

    def run(self, z, allowed) -> bool:
        """Minimise ``z`` with Bland's rule; False when unbounded."""
        while True:
            entering = None
            for c, d in z.coeffs.items():
                if d < 0 and c in allowed and (entering is None or c < entering):
                    entering = c
            if entering is None:
                return True
            leave = None
            best = None
            for i, row in enumerate(self.rows):
                a = row.get(entering)
                if a is None or a <= 0:
                    continue
                ratio = self.rhs[i] / a
                if best is None or ratio < best or (
                    ratio == best and self.basis[i] < self.basis[leave]
                ):
                    best, leave = ratio, i
            if leave is None:
                return False
            self.pivot(leave, entering, [z])


class _ZRow:
    """Objective row: ``z = value + sum coeffs[c] * x_c`` over nonbasic c."""

    def __init__(self, coeffs: dict, value):
        self.coeffs = coeffs
        self.value = value


def _solve(lp: LinearProgram, minimise: bool) -> BasicSolution:
    lp.validate()
    index = {v: k for k, v in enumerate(lp.variables)}
    n = len(lp.variables)

    kept = []
    for k, row in enumerate(lp.constraints):
        coeffs = {index[v]: _q(c) for v, c in row.coeffs.items() if c != 0}
        if not coeffs:
            if not row.satisfied({}):
                return BasicSolution(INFEASIBLE)
            continue
        kept.append((k, coeffs, row.sense, _q(row.rhs)))

    rows, rhs, basis, artificials = [], [], [], []
    n_cols = n + len(kept)
    for r, (_, coeffs, sense, b) in enumerate(kept):
        slack = n + r
        coeffs = dict(coeffs)
        coeffs[slack] = mpq(1) if sense == LE else mpq(-1)
        if b < 0:
            coeffs = {c: -v for c, v in coeffs.items()}
            b = -b
        if coeffs[slack] > 0:
            basis.append(slack)
        else:
            art = n_cols + len(artificials)
            artificials.append(art)
            coeffs[art] = mpq(1)
            basis.append(art)
        rows.append(coeffs)
        rhs.append(b)

    tab = _Tableau(rows, rhs, basis)
    real = set(range(n_cols))
    art_set = set(artificials)

    if artificials:
        zc: dict = {}
        z0 = mpq(0)
        for r, row in enumerate(rows):
            if basis[r] in art_set:
                z0 += rhs[r]
                for c, v in row.items():
                    if c not in art_set:
                        zc[c] = zc.get(c, 0) - v
        z = _ZRow({c: v for c, v in zc.items() if v}, z0)
        tab.run(z, real)
        if z.value > 0:
            return BasicSolution(INFEASIBLE, pivots=tab.pivots)
        for r in range(len(rows)):
            if basis[r] in art_set:
                # every row carries its own slack, so a real column is nonzero here
                col = min(c for c in rows[r] if c in real)
                tab.pivot(r, col, [])
        for row in rows:
            for a in artificials:
                row.pop(a, None)

    if minimise:
        cost = {index[v]: _q(c) for v, c in lp.objective.items() if c != 0}
        zc = dict(cost)
        z0 = mpq(0)
        for r, row in enumerate(rows):
            cb = cost.get(basis[r])
            if not cb:
                continue
            z0 += cb * rhs[r]
            for c, v in row.items():
                new = zc.get(c, 0) - cb * v
                if new:
                    zc[c] = new
                else:
                    zc.pop(c, None)
        z = _ZRow(zc, z0)
        if not tab.run(z, real):
            raise UnboundedError("objective unbounded below")

    raw = [mpq(0)] * n_cols
    for r, b in enumerate(basis):
        raw[b] = rhs[r]
    values = {v: _frac(raw[k]) for k, v in enumerate(lp.variables)}
    basic = set(basis)
    tight_bounds = tuple(v for k, v in enumerate(lp.variables) if k not in basic)
    tight_rows = tuple(kept[r][0] for r in range(len(kept)) if n + r not in basic)
    return BasicSolution(
        OPTIMAL if minimise else FEASIBLE,
        values,
        tight_rows,
        tight_bounds,
        lp.objective_value(values),
        tab.pivots,
    )


# callables ``hook(lp, solution)`` run after every solve; used for auditing
solve_hooks: list = []


def _notify(lp: LinearProgram, sol: BasicSolution) -> BasicSolution:
    for hook in solve_hooks:
        hook(lp, sol)
    return sol


def solve_min_basic(lp: LinearProgram) -> BasicSolution:
    """Return an optimal vertex of ``lp`` or an ``infeasible`` status."""
    return _notify(lp, _solve(lp, minimise=True))


def solve_feasible_basic(lp: LinearProgram) -> BasicSolution:
    """Return some vertex of the feasible region; the objective is ignored."""
    return _notify(lp, _solve(lp, minimise=False))


def rank(vectors: Iterable[Mapping]) -> int:
    """Exact rank of sparse row vectors (dicts column -> rational)."""
    order: dict = {}
    pivots: dict = {}
    for vec in vectors:
        row = {}
        for c, v in vec.items():
            if v != 0:
                row[order.setdefault(c, len(order))] = Fraction(v)
        while row:
            col = min(row)
            prow = pivots.get(col)
            if prow is None:
                pivots[col] = row
                break
            f = row[col] / prow[col]
            for c, v in prow.items():
                new = row.get(c, 0) - f * v
                if new:
                    row[c] = new
                else:
                    row.pop(c, None)
    return len(pivots)


def verify_basic(lp: LinearProgram, sol: BasicSolution) -> bool:
    """True iff ``sol`` is exactly feasible and is a vertex of ``lp``."""
    if sol.status not in (OPTIMAL, FEASIBLE):
        return False
    values = {v: Fraction(sol.values.get(v, 0)) for v in lp.variables}
    if not lp.is_feasible_point(values):
        return False
    support = [v for v in lp.variables if values[v] != 0]
    if not support:
        return True
    in_support = set(support)
    tight = [
        {v: c for v, c in row.coeffs.items() if v in in_support}
        for row in lp.constraints
        if row.is_tight(values)
    ]
    return rank(tight) == len(support)
