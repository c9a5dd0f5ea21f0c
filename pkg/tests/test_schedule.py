from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowround.instance import make_instance
from flowround.oracle import exhaustive_single_machine
from flowround.schedule import (
    CLASS_SJF,
    FIFO,
    POLICIES,
    SRPT,
    MachineJob,
    Schedule,
    Slice,
    at_most_one_partial_per_class,
    metrics,
    remaining_volume,
    simulate,
    validate,
)


def flows(batch, policy):
    done = {}
    for sl in simulate(batch, policy):
        done[sl.job] = sl.end
    return {j.id: done[j.id] - j.available for j in batch}


def test_srpt_example():
    f = flows([MachineJob(0, 0, 3), MachineJob(1, 1, 1)], SRPT)
    assert f == {0: 4, 1: 1}
    assert sum(f.values()) == 5 == exhaustive_single_machine([(0, 3), (1, 1)], "total")


def test_fifo_example():
    assert flows([MachineJob(0, 0, 2), MachineJob(1, 1, 2)], FIFO) == {0: 2, 1: 3}


def test_class_sjf_prefers_lower_class():
    batch = [MachineJob("A", 0, 2, 1), MachineJob("B", 0, 1, 0)]
    assert simulate(batch, CLASS_SJF) == [Slice("B", 0, 1), Slice("A", 1, 3)]


def test_unknown_policy():
    with pytest.raises(ValueError):
        simulate([MachineJob(0, 0, 1)], "LIFO")


batches = st.lists(
    st.tuples(st.integers(0, 8), st.integers(1, 5)), min_size=0, max_size=7
).map(lambda rows: [MachineJob(k, r, p, (p - 1).bit_length()) for k, (r, p) in enumerate(rows)])


@settings(max_examples=150, deadline=None)
@given(batches, st.sampled_from(POLICIES))
def test_simulate_work_conserving_and_complete(batch, policy):
    slices = simulate(batch, policy)
    assert simulate(batch, policy) == slices
    busy = {t: sl.job for sl in slices for t in range(sl.start, sl.end)}
    assert len(busy) == sum(len(sl) for sl in slices)
    work = {j.id: 0 for j in batch}
    for sl in slices:
        work[sl.job] += len(sl)
    assert work == {j.id: j.p for j in batch}
    avail = {j.id: j.available for j in batch}
    assert all(sl.start >= avail[sl.job] for sl in slices)
    # never idle while an available job is unfinished
    left = {j.id: j.p for j in batch}
    horizon = max((sl.end for sl in slices), default=0)
    for t in range(horizon):
        if t in busy:
            left[busy[t]] -= 1
        else:
            assert not any(avail[j] <= t and left[j] > 0 for j in left)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(1, 3)), min_size=1, max_size=4))
def test_fifo_minimises_max_flow(rows):
    batch = [MachineJob(k, r, p) for k, (r, p) in enumerate(rows)]
    assert max(flows(batch, FIFO).values()) == exhaustive_single_machine(rows, "max")


def one_machine(slices, rows):
    inst = make_instance(1, [(r, [p]) for r, p in rows])
    return inst, Schedule.from_slices(inst, [slices])


def test_fractional_flow_example():
    _, s = one_machine([Slice(0, 2, 4)], [(0, 2)])
    mt = metrics(s)
    assert mt.per_job[0]["fractional_flow"] == Fraction(5, 2)
    assert mt.total_fractional_flow == Fraction(5, 2)
    assert mt.total_flow == 4 == mt.max_flow


def test_empty_schedule_metrics():
    mt = metrics(Schedule(1, [[]]))
    assert (mt.total_flow, mt.max_flow, mt.total_fractional_flow, mt.per_job) == (0, 0, 0, [])


@settings(max_examples=100, deadline=None)
@given(batches.filter(bool), st.sampled_from(POLICIES))
def test_flow_accounting_identity(batch, policy):
    rows = [(j.available, j.p) for j in batch]
    inst = make_instance(1, [(r, [p]) for r, p in rows])
    s = Schedule.from_slices(inst, [simulate(batch, policy)])
    horizon = max(sl.end for sl in s.machines[0]) + 1
    for k in range(4):
        lhs = sum(remaining_volume(s, 0, k, horizon))
        rhs = sum(
            t - s.release[sl.job]
            for sl in s.machines[0] if s.klass(sl.job) == k
            for t in range(sl.start, sl.end)
        )
        assert lhs == rhs
    mt = metrics(s)
    for row in mt.per_job:
        assert row["fractional_flow"] <= row["flow"]
        assert row["flow"] >= row["p"]


def test_validate_overlap():
    _, s = one_machine([Slice(0, 0, 2), Slice(1, 1, 2)], [(0, 2), (0, 1)])
    problems = validate(s, make_instance(1, [(0, [2]), (0, [1])]))
    assert any("machine 0 busy twice at slot 1" in p for p in problems)


def test_validate_early_start():
    inst, s = one_machine([Slice(0, 0, 1)], [(1, 1)])
    assert any("before release" in p for p in validate(s, inst))


def test_validate_correct():
    inst, s = one_machine([Slice(0, 0, 3), Slice(1, 3, 4)], [(0, 3), (1, 1)])
    assert validate(s, inst) == []


def test_validate_wrong_work_and_migration():
    inst = make_instance(2, [(0, [2, 2])])
    s = Schedule(2, [[Slice(0, 0, 1)], [Slice(0, 1, 2)]], {0: 0}, {0: 2}, {0: 0})
    assert validate(s, inst)
    short = Schedule.from_slices(inst, [[Slice(0, 0, 1)], []])
    assert validate(short, inst)


def test_one_partial_per_class():
    inst = make_instance(1, [(0, [2]), (0, [2])])
    good = Schedule.from_slices(inst, [[Slice(0, 0, 2), Slice(1, 2, 4)]])
    bad = Schedule.from_slices(inst, [[Slice(0, 0, 1), Slice(1, 1, 2), Slice(0, 2, 3), Slice(1, 3, 4)]])
    assert at_most_one_partial_per_class(good)
    assert not at_most_one_partial_per_class(bad)
