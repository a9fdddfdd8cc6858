import random
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from crscheme.game import AlgorithmMap, evaluate_map, solve_value
from crscheme.model import SchemeParams, make_params
from crscheme.online import fixed_machine, graham_list, run_online
from oracles import brute_makespan

P2 = make_params(1, 2, s=2, cap=3)


@pytest.fixture(scope="module")
def optimal():
    return solve_value(P2)


def test_graham_examples():
    t = run_online("graham", [1, 1, 2], P2)
    assert [st.makespan for st in t.steps] == [1, 1, 3]
    assert t.report.ratios == [1, 1, F(3, 2)]
    t = graham_list([2, 1, 1], P2)
    assert t.steps[-1].makespan == 2 and t.report.ratios[-1] == 1
    assert run_online("graham", ["7/3"], P2).report.ratios == [1]
    assert run_online("graham", [], P2).steps == []


def test_fixed_machine():
    t = fixed_machine([1, 1], P2, 2)
    assert t.machines == [2, 2] and t.report.ratios[-1] == 2
    assert run_online("fixed:1", [1], P2).machines == [1]
    with pytest.raises(ValueError):
        run_online("fixed:3", [1], P2)
    with pytest.raises(ValueError):
        run_online("graham", [1, 0], P2)


sizes_st = st.lists(st.fractions(min_value=F(1, 4), max_value=8, max_denominator=4), max_size=14)


@given(sizes_st)
def test_trace_properties(sizes):
    p = make_params(1, 2, s=2, cap=3)
    amap = AlgorithmMap(p)
    t = run_online(amap, sizes, p)
    assert len(t.steps) == len(sizes)
    assert t.replay_loads() == t.steps[-1].loads if sizes else True
    for j, st_ in enumerate(t.steps, start=1):
        if st_.exact:
            assert st_.ratio >= 1
        if j <= 7:
            assert st_.opt == brute_makespan(sizes[:j], p.speed_values)
    if sizes:
        cut = len(sizes) // 2
        head = run_online(AlgorithmMap(p), sizes[:cut], p)
        assert [s.machine for s in head.steps] == t.machines[:cut]
        assert [s.stage for s in head.steps] == [s.stage for s in t.steps[:cut]]


@given(sizes_st)
def test_graham_prefix_property(sizes):
    full = graham_list(sizes, P2)
    part = graham_list(sizes[: len(sizes) // 2], P2)
    assert part.machines == full.machines[: len(part.machines)]


def _capped_window_instance(rng, p, n, top):
    counts: dict[int, int] = {}
    out = []
    while len(out) < n:
        e = rng.randint(top - p.s, top)
        if counts.get(e, 0) < p.cap:
            counts[e] = counts.get(e, 0) + 1
            out.append(p.base**e)
    return out


@pytest.mark.parametrize("params", [P2, make_params("1/2", 2, s=2, cap=2), SchemeParams(eps=F(1), m=2, s=1, cap=3, speeds=(1, 0))])
def test_online_keys_match_game(params):
    res = solve_value(params)
    ev = evaluate_map(res.map, params)
    rng = random.Random(3)
    for _ in range(40):
        inst = _capped_window_instance(rng, params, rng.randint(1, (params.s + 1) * params.cap), rng.randint(-2, 2))
        trace = run_online(res.map, inst, params)
        for st_ in trace.steps:
            assert st_.stage == "passed"
            assert st_.key in ev.keys
            assert st_.game_ratio <= res.value
        # all jobs stay relevant, so the real ratio is the game ratio
        assert max(trace.report.ratios) <= res.value


def test_pipeline_stages(optimal):
    rng = random.Random(11)
    inst = [F(rng.randint(1, 40), rng.randint(1, 4)) for _ in range(60)]
    trace = run_online(optimal.map, inst, P2)
    stages = {st.stage for st in trace.steps}
    assert "passed" in stages and "containerized" in stages
    for st_ in trace.steps:
        if st_.key is not None:
            assert st_.game_ratio <= optimal.value
