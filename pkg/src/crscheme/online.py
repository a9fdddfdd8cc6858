"""Online execution of algorithm maps and classical baselines on job streams."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

from .canonical import CanonicalKey, canonical_form, key_ratio
from .game import AlgorithmMap
from .model import Configuration, JobEvent, RatioReport, SchemeParams, to_fraction
from .offline import DEFAULT_OPT_BUDGET, OracleBudgetExceeded, exact_makespan_sizes, lower_bound_sizes
from .transforms import ContainerWrapper, SmallJobFilter, least_loaded, round_size

log = logging.getLogger(__name__)

BASELINES = ("graham",)


@dataclass
class TraceStep:
    index: int
    size: Fraction
    size_exp: int
    stage: str
    machine: int
    loads: tuple[Fraction, ...]
    makespan: Fraction
    opt: Fraction
    exact: bool
    game_ratio: Optional[Fraction] = None
    key: Optional[CanonicalKey] = None

    @property
    def ratio(self) -> Fraction:
        return self.makespan / self.opt if self.opt else Fraction(1)


@dataclass
class ExecutionTrace:
    params: SchemeParams
    steps: list[TraceStep] = field(default_factory=list)
    report: RatioReport = field(default_factory=RatioReport)

    @property
    def machines(self) -> list[int]:
        return [st.machine for st in self.steps]

    def replay_loads(self) -> tuple[Fraction, ...]:
        vol = [Fraction(0)] * self.params.m
        for st in self.steps:
            vol[st.machine - 1] += st.size
        return tuple(v / sp for v, sp in zip(vol, self.params.speed_values))


@lru_cache(maxsize=4096)
def _opt_cached(sizes: tuple[Fraction, ...], speeds: tuple[Fraction, ...], budget: int) -> tuple[Fraction, bool]:
    try:
        return exact_makespan_sizes(sizes, speeds, budget), True
    except OracleBudgetExceeded:
        return lower_bound_sizes(sizes, speeds), False


class _Recorder:
    def __init__(self, params: SchemeParams, opt_budget: int):
        self.params = params
        self.opt_budget = opt_budget
        self.trace = ExecutionTrace(params)
        self.volume = [Fraction(0)] * params.m
        self.sizes: list[Fraction] = []

    def record(self, size, exp, stage, machine, game_ratio=None, key=None):
        params = self.params
        self.volume[machine - 1] += size
        self.sizes.append(size)
        loads = tuple(v / sp for v, sp in zip(self.volume, params.speed_values))
        makespan = max(loads)
        opt, exact = _opt_cached(tuple(sorted(self.sizes)), params.speed_values, self.opt_budget)
        step = TraceStep(len(self.sizes), size, exp, stage, machine, loads, makespan, opt, exact, game_ratio, key)
        self.trace.steps.append(step)
        self.trace.report.add(makespan, opt, exact)


def graham_list(instance: Sequence, params: SchemeParams, opt_budget: int = DEFAULT_OPT_BUDGET) -> ExecutionTrace:
    """List scheduling on the raw sizes: earliest finish time, lowest index on ties."""
    rec = _Recorder(params, opt_budget)
    sp = params.speed_values
    for raw in instance:
        p = to_fraction(raw)
        if p <= 0:
            raise ValueError(f"job size must be positive, got {p}")
        i = min(range(params.m), key=lambda k: ((rec.volume[k] + p) / sp[k], k)) + 1
        rec.record(p, round_size(p, params.eps), "baseline", i)
    return rec.trace


def fixed_machine(instance: Sequence, params: SchemeParams, machine: int, opt_budget: int = DEFAULT_OPT_BUDGET) -> ExecutionTrace:
    if not 1 <= machine <= params.m:
        raise ValueError(f"fixed machine {machine} outside 1..{params.m}")
    rec = _Recorder(params, opt_budget)
    for raw in instance:
        p = to_fraction(raw)
        if p <= 0:
            raise ValueError(f"job size must be positive, got {p}")
        rec.record(p, round_size(p, params.eps), "baseline", machine)
    return rec.trace


def graham_config(params: SchemeParams) -> Callable[[Configuration], int]:
    """List scheduling as a configuration algorithm: sees every job, not just a key."""

    def choose(config: Configuration) -> int:
        vol = [Fraction(0)] * params.m
        for job, i in zip(config.jobs, config.chi):
            vol[i - 1] += params.size(job.size_exp)
        p = params.size(config.pending.size_exp)
        sp = params.speed_values
        return min(range(params.m), key=lambda k: ((vol[k] + p) / sp[k], k)) + 1

    return choose


class _FilteredMap:
    """Inner algorithm of the container wrapper: small-job filter, then the map."""

    def __init__(self, alg: Callable[[Configuration], int], params: SchemeParams, volume: list[Fraction]):
        self.alg = alg
        self.params = params
        self.filter = SmallJobFilter(params)
        self.kept = Configuration()
        self.volume = volume
        self.last_diverted = False
        self.last_key: Optional[CanonicalKey] = None

    def __call__(self, config: Configuration) -> int:
        job = config.pending
        self.last_diverted = self.filter.offer(job)
        if self.last_diverted:
            self.last_key = None
            return least_loaded(self.volume, self.params)
        cfg = self.kept.release(job.size_exp)
        machine = self.alg(cfg)
        if not 1 <= machine <= self.params.m:
            raise ValueError(f"algorithm chose machine {machine} outside 1..{self.params.m}")
        self.kept = cfg.place(machine)
        self.last_key = canonical_form(self.kept, self.params)[0]
        return machine


def run_online(
    alg: Union[AlgorithmMap, Callable[[Configuration], int], str],
    instance: Sequence,
    params: SchemeParams,
    opt_budget: int = DEFAULT_OPT_BUDGET,
) -> ExecutionTrace:
    """Execute ``alg`` online on ``instance`` (positive rationals, arrival order).

    Baseline names (``graham``, ``fixed:<i>``) run on the raw sizes. Maps and
    other configuration callables see the transformed stream: sizes rounded
    up to powers of 1+eps, then the container wrapper, then the small-job
    filter; every stage is recorded in the trace.
    """
    if isinstance(alg, str):
        if alg == "graham":
            return graham_list(instance, params, opt_budget)
        if alg.startswith("fixed:"):
            return fixed_machine(instance, params, int(alg.split(":", 1)[1]), opt_budget)
        raise ValueError(f"unknown baseline {alg!r}")
    rec = _Recorder(params, opt_budget)
    inner = _FilteredMap(alg, params, rec.volume)
    wrapper = ContainerWrapper(params, inner, opt_budget)
    rounded = [Fraction(0)] * params.m
    for n, raw in enumerate(instance, start=1):
        p = to_fraction(raw)
        if p <= 0:
            raise ValueError(f"job size must be positive, got {p}")
        k = round_size(p, params.eps)
        routed = wrapper.route(JobEvent(n, k))
        stage = routed.stage
        game_ratio = key = None
        if routed.inner_job is not None:
            if inner.last_diverted:
                stage = "diverted" if stage == "passed" else stage + "+diverted"
            else:
                key = inner.last_key
                game_ratio = key_ratio(key, params)
        rec.record(p, k, stage, routed.machine, game_ratio, key)
        rounded[routed.machine - 1] += params.size(k)
        assert all(a <= b for a, b in zip(rounded, wrapper.inner_volume())), "outer load exceeds inner load"
        if not inner.filter.within_bound():
            log.debug("diverted volume above eps*(1+eps)^phase at job %d", n)
    return rec.trace

