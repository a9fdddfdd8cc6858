from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from crscheme.model import Configuration, JobEvent, loads_of, make_params
from crscheme.transforms import (
    ContainerWrapper,
    SmallJobFilter,
    filter_small,
    normalize_speeds,
    round_size,
    wrap_container,
)


def least_loaded_alg(params):
    def choose(cfg: Configuration) -> int:
        loads = loads_of(cfg, params)
        return min(range(params.m), key=lambda i: (loads[i], i)) + 1

    return choose


def events(exps):
    return [JobEvent(n, e) for n, e in enumerate(exps, start=1)]


@pytest.mark.parametrize("p,eps,k", [(7, "1/2", 5), (1, "1/2", 0), (1, "1/7", 0), ("9/4", "1/2", 2), ("1/3", 1, -1)])
def test_round_size_examples(p, eps, k):
    assert round_size(p, eps) == k


@given(st.fractions(min_value=F(1, 100), max_value=100), st.sampled_from([F(1), F(1, 2), F(1, 5)]))
def test_round_size_bracket(p, eps):
    k = round_size(p, eps)
    ratio = (1 + eps) ** k / p
    assert 1 <= ratio <= 1 + eps
    assert (1 + eps) ** (k - 1) < p


def test_round_size_rejects_nonpositive():
    with pytest.raises(ValueError):
        round_size(0, 1)


def test_normalize_examples():
    v = normalize_speeds([1, 10], "1/2", 2)
    assert v.exponents == (0,) and v.dropped == (1,) and v.origin == (2,)
    v = normalize_speeds([1, 2], "1/2", 2)
    assert v.exponents == (1, 0) and v.origin == (2, 1) and not v.dropped
    assert normalize_speeds([1, 1, 1], "1/3", 3).exponents == (0, 0, 0)


@given(
    st.lists(st.fractions(min_value=F(1, 10), max_value=10, max_denominator=10), min_size=1, max_size=5),
    st.sampled_from([F(1), F(1, 2), F(1, 4)]),
)
def test_normalize_rounds_down_within_factor(raw, eps):
    m = len(raw)
    v = normalize_speeds(raw, eps, m)
    base = 1 + eps
    slowest = min(raw[i - 1] for i in v.origin)
    assert list(v.exponents) == sorted(v.exponents, reverse=True) and v.exponents[-1] == 0
    assert base ** v.exponents[0] <= F(m) / eps
    for e, i in zip(v.exponents, v.origin):
        rel = raw[i - 1] / slowest
        # execution times grow by at most 1+eps
        assert base**e <= rel < base ** (e + 1)
    for i in v.dropped:
        assert raw[i - 1] <= eps / m * max(raw)


def test_filter_examples():
    p = make_params(1, 2, s=3, cap=1)
    kept, diverted = filter_small(events([0, 5, 1]), p)
    assert [j.size_exp for j in kept] == [0, 5]
    assert [j.size_exp for j, _ in diverted] == [1]
    kept, diverted = filter_small(events([2, 2, 2]), p)
    assert not diverted
    p = make_params("1/2", 2, s=12, cap=16)
    kept, diverted = filter_small(events([0, 0, 12, 0]), p)
    assert not diverted


@given(st.lists(st.integers(-20, 20), max_size=60))
def test_filter_diverted_mass_on_capped_streams(exps):
    # with at most `cap` jobs per class the diverted mass stays below eps * base**phase
    p = make_params("1/2", 2)
    seen: dict[int, int] = {}
    capped = []
    for e in exps:
        if seen.get(e, 0) < p.cap:
            seen[e] = seen.get(e, 0) + 1
            capped.append(e)
    filt = SmallJobFilter(p)
    for job in events(capped):
        filt.offer(job)
        assert filt.within_bound()


def test_container_example():
    p = make_params("1/2", 2, s=2, cap=16)
    routed, inner = wrap_container(events([0] * 17), p, least_loaded_alg(p))
    assert [r.stage for r in routed] == ["passed"] * 16 + ["containerized"]
    assert inner.jobs[-1].size_exp == 2
    assert len(inner.jobs) == 17


@given(st.lists(st.integers(0, 3), max_size=12))
def test_container_inactive_below_cap(exps):
    p = make_params(1, 2, s=3, cap=12)
    alg = least_loaded_alg(p)
    routed, inner = wrap_container(events(exps), p, alg)
    assert all(r.stage == "passed" for r in routed)
    assert [j.size_exp for j in inner.jobs] == exps
    cfg = Configuration()
    for e, r in zip(exps, routed):
        cfg = cfg.release(e)
        assert alg(cfg) == r.machine
        cfg = cfg.place(r.machine)


@given(st.lists(st.integers(0, 6), max_size=80), st.integers(1, 3))
def test_container_invariants(exps, cap):
    p = make_params("1/2", 2, s=3, cap=cap)
    w = ContainerWrapper(p, least_loaded_alg(p))
    for job in events(exps):
        w.route(job)
        assert all(c <= cap for c in w.counts.values())
        assert all(a <= b for a, b in zip(w.outer_volume, w.inner_volume()))
        for box in w.containers:
            assert box.filled <= p.size(box.size_exp)
        open_boxes = [b for b in w.containers if not b.closed]
        assert len(open_boxes) <= 1
