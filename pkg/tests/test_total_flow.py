from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowround import lp as lpmod
from flowround import total_flow
from flowround.instance import generate_random, make_instance
from flowround.lp import ContractError
from flowround.oracle import oracle_total
from flowround.schedule import Slice, at_most_one_partial_per_class, validate
from flowround.total_flow import (
    RoundingError,
    RoundTrace,
    build_lp0,
    overload_profile,
    round_once,
    solve_total,
    tentative_cost,
    tentative_to_schedule,
    window_excess,
)
from flowround.verifier import ceil_half, round_limit

instances = st.builds(
    generate_random,
    st.integers(1, 5), st.integers(1, 2), st.sampled_from([2, 4]), st.integers(0, 4),
    st.sampled_from([1.0, 0.7]), st.integers(0, 10**6),
)


def test_lp0_single_job():
    inst = make_instance(1, [(0, [1])])
    assert inst.horizon == 1
    lp, layout = build_lp0(inst)
    assert lp.variables == [(0, 0, 0)]
    names = [row.name for row in lp.constraints]
    assert names.count(("service", 0)) == 1
    assert {name[2] for name in names if name[0] == "capacity"} == {0}
    assert set(layout) == {(0, 0)}


@settings(max_examples=30, deadline=None)
@given(instances)
def test_lp0_shape(inst):
    lp, layout = build_lp0(inst)
    T = inst.horizon
    assert len(lp.variables) <= inst.n * inst.m * T
    for (i, k), intervals in layout.items():
        for iv in intervals:
            assert iv.size == 4 * 2**k
            slots = {t for _, _, t in iv.variables}
            assert max(slots) - min(slots) < 4 * 2**k
            assert all(inst.job(j).p[i] <= 2**k for _, j, _ in iv.variables)


def test_lp0_lower_bounds_oracle():
    inst = make_instance(1, [(0, [3]), (1, [1])])
    sol = lpmod.solve_min_basic(build_lp0(inst)[0])
    assert oracle_total(inst).value == 5
    assert sol.objective <= 5


def test_round_once_fixes_lone_job():
    inst = make_instance(1, [(2, [3])])
    lp, layout = build_lp0(inst)
    sol = lpmod.solve_min_basic(lp)
    new_lp, _, trace = round_once(inst, lp, layout, sol, RoundTrace())
    assert trace.records[0].assigned == {0: (0, 2)}
    assert not new_lp.variables and not new_lp.constraints


def test_round_once_rejects_non_vertex():
    inst = make_instance(2, [(0, [1, 1])])
    lp, layout = build_lp0(inst)
    half = {v: Fraction(0) for v in lp.variables}
    half[(0, 0, 0)] = half[(1, 0, 0)] = Fraction(1, 2)
    bad = lpmod.BasicSolution(lpmod.OPTIMAL, half, (), (), lp.objective_value(half))
    with pytest.raises(ContractError):
        round_once(inst, lp, layout, bad, RoundTrace())


def test_round_cap_is_enforced(monkeypatch):
    monkeypatch.setattr(total_flow, "round_cap", lambda n: 0)
    with pytest.raises(RoundingError):
        solve_total(make_instance(1, [(0, [1])]))


def test_single_job_runs_at_release_on_fastest_machine():
    inst = make_instance(3, [(4, [5, 2, None])])
    res = solve_total(inst)
    assert res.rounds <= 2
    assert res.tentative == {0: (1, 4)}


@settings(max_examples=40, deadline=None)
@given(instances)
def test_rounding_invariants(inst):
    res = solve_total(inst)
    counts = res.trace.unassigned_counts()
    assert counts[0] == inst.n
    for a, b in zip(counts + [0], counts[1:] + [0]):
        assert b <= ceil_half(a)
    assert res.rounds <= round_limit(inst.n)
    assert tentative_cost(inst, res.tentative) <= res.lp0_objective
    assert set(res.tentative) == {j.id for j in inst.jobs}
    for j, (i, t) in res.tentative.items():
        assert inst.job(j).eligible(i) and t >= inst.job(j).r
    for rec in res.trace.records:
        assert max(rec.tight_capacity, rec.tight_capacity_all) <= ceil_half(rec.unassigned)
    # each relaxation accepts the previous solution
    for prev, rec in zip(res.trace.records, res.trace.records[1:]):
        carried = {v: prev.solution[v] for v in rec.lp.variables}
        assert rec.lp.is_feasible_point(carried)
        assert rec.objective <= rec.lp.objective_value(carried)


@settings(max_examples=40, deadline=None)
@given(instances)
def test_regrouped_sizes(inst):
    res = solve_total(inst)
    for rec in res.trace.records[1:]:
        for (i, k), intervals in rec.layout.items():
            low, high = 4 * 2**k, 5 * 2**k
            for a, iv in enumerate(intervals):
                assert low <= iv.size
                if a < len(intervals) - 1:
                    assert iv.size <= high
            for iv in intervals:
                row = {v: 1 for v in iv.variables}
                volume = sum(rec.solution[v] for v in row)
                # a tight interval always holds at least a full window of volume
                if volume == iv.size:
                    assert volume >= low


def test_schedule_sjf_example():
    inst = make_instance(1, [(0, [2]), (0, [1])])
    s = tentative_to_schedule(inst, {0: (0, 0), 1: (0, 0)})
    assert s.machines[0] == [Slice(1, 0, 1), Slice(0, 1, 3)]


def test_schedule_single_job_from_tentative_slot():
    inst = make_instance(1, [(0, [3])])
    s = tentative_to_schedule(inst, {0: (0, 5)})
    assert s.machines[0] == [Slice(0, 5, 8)]


@settings(max_examples=40, deadline=None)
@given(instances)
def test_assembled_schedule_is_valid(inst):
    res = solve_total(inst)
    s = tentative_to_schedule(inst, res.tentative)
    assert validate(s, inst) == []
    assert at_most_one_partial_per_class(s)


def test_overload_single_job():
    inst = make_instance(1, [(0, [3])])
    y = {0: (0, 2)}
    assert window_excess(inst, y, 0, 2, 2, 3) == 3 - 1
    assert overload_profile(inst, y).excess[(0, 2)] == 3


def test_overload_empty_window():
    inst = make_instance(1, [(0, [3])])
    assert window_excess(inst, {0: (0, 2)}, 0, 2, 4, 6) <= 0


@settings(max_examples=40, deadline=None)
@given(instances)
def test_overload_bound(inst):
    res = solve_total(inst)
    prof = overload_profile(inst, res.tentative)
    for (i, k), e in prof.excess.items():
        assert e <= (8 + 10 * res.rounds) * 2**k
    T = inst.horizon
    # the candidate endpoints find the true maximum
    for (i, k), e in prof.excess.items():
        brute = max(window_excess(inst, res.tentative, i, k, a, b)
                    for a in range(T + 1) for b in range(a, T + 1))
        assert brute == e


def test_trace_json():
    res = solve_total(make_instance(2, [(0, [1, 2]), (0, [2, 1]), (1, [1, 1])]))
    data = res.trace.to_dict()
    assert [r["unassigned"] for r in data["rounds"]] == res.trace.unassigned_counts()
