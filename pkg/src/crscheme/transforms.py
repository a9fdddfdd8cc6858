"""Online input restrictions: size rounding, container jobs, the small-job
filter and speed normalization.

Sizes round up and speeds round down, so every transformation can only make
the measured makespan larger.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, NamedTuple, Optional, Sequence

from .model import Configuration, JobEvent, SchemeParams, ceil_log, floor_log, to_fraction
from .offline import DEFAULT_OPT_BUDGET, exact_makespan, opt_lower_bound

log = logging.getLogger(__name__)

# An online algorithm in normal form: configuration with a pending job -> machine (1-based).
Algorithm = Callable[[Configuration], int]


def round_size(p, eps) -> int:
    """Exponent k with (1+eps)**(k-1) < p <= (1+eps)**k."""
    p = to_fraction(p)
    if p <= 0:
        raise ValueError(f"job size must be positive, got {p}")
    return ceil_log(p, 1 + to_fraction(eps))


class SpeedVector(NamedTuple):
    exponents: tuple[int, ...]
    origin: tuple[int, ...]
    dropped: tuple[int, ...]


def normalize_speeds(raw: Sequence, eps, m: int) -> SpeedVector:
    """Drop machines slower than (eps/m) * s_max, round the rest down to powers of 1+eps.

    Exponents are relative to the slowest surviving machine and returned
    fastest first; ``origin`` gives the 1-based raw index of each survivor.
    """
    eps = to_fraction(eps)
    raw = [to_fraction(v) for v in raw]
    if not raw or any(v <= 0 for v in raw):
        raise ValueError("speeds must be a non-empty list of positive numbers")
    base = 1 + eps
    fastest = max(raw)
    cutoff = eps / m * fastest
    # the fastest machines always survive, even when eps/m reaches 1
    kept = [i for i, v in enumerate(raw) if v > cutoff or v == fastest]
    dropped = tuple(i + 1 for i in range(len(raw)) if i not in kept)
    slowest = min(raw[i] for i in kept)
    exps = {i: floor_log(raw[i] / slowest, base) for i in kept}
    order = sorted(kept, key=lambda i: (-exps[i], i))
    out = tuple(exps[i] for i in order)
    if base ** out[0] > Fraction(m) / eps:
        raise AssertionError(f"normalized speed ratio {base ** out[0]} exceeds m/eps")
    return SpeedVector(out, tuple(i + 1 for i in order), dropped)


def least_loaded(volumes: Sequence[Fraction], params: SchemeParams) -> int:
    """1-based machine with the smallest execution-time load, lowest index on ties."""
    return min(range(params.m), key=lambda i: (volumes[i] / params.speed_values[i], i)) + 1


@dataclass
class SmallJobFilter:
    """Diverts jobs below the relevance window of everything released before them.

    A job is diverted when its exponent is smaller than (max earlier exponent
    - s); diverted jobs go to the least-loaded machine, where the loads passed
    in are the caller's true machine volumes.
    """

    params: SchemeParams
    max_exp: Optional[int] = None
    diverted: list[JobEvent] = field(default_factory=list)
    diverted_volume: Fraction = Fraction(0)

    def is_small(self, job: JobEvent) -> bool:
        return self.max_exp is not None and job.size_exp < self.max_exp - self.params.s

    def offer(self, job: JobEvent) -> bool:
        """Record ``job``; True if it must be diverted."""
        small = self.is_small(job)
        if small:
            self.diverted.append(job)
            self.diverted_volume += self.params.size(job.size_exp)
            bound = self.params.eps * self.params.size(self.max_exp)
            if self.diverted_volume > bound:
                log.warning(
                    "diverted volume %s exceeds eps*(1+eps)^%d = %s (stream violates the per-size cap)",
                    self.diverted_volume, self.max_exp, bound,
                )
        else:
            self.max_exp = job.size_exp if self.max_exp is None else max(self.max_exp, job.size_exp)
        return small

    def within_bound(self) -> bool:
        if self.max_exp is None:
            return True
        return self.diverted_volume <= self.params.eps * self.params.size(self.max_exp)


def filter_small(
    stream: Iterable[JobEvent], params: SchemeParams, volumes: Optional[Sequence[Fraction]] = None
) -> tuple[list[JobEvent], list[tuple[JobEvent, int]]]:
    """Split ``stream`` into kept jobs and diverted jobs with fallback machines.

    Without downstream placements the least-loaded choice only sees the
    diverted jobs themselves, on top of the optional starting ``volumes``.
    """
    filt = SmallJobFilter(params)
    vol = list(volumes) if volumes is not None else [Fraction(0)] * params.m
    kept, diverted = [], []
    for job in stream:
        if filt.offer(job):
            i = least_loaded(vol, params)
            vol[i - 1] += params.size(job.size_exp)
            diverted.append((job, i))
        else:
            kept.append(job)
    return kept, diverted


@dataclass
class Container:
    size_exp: int
    trigger_exp: int
    machine: int
    filled: Fraction
    closed: bool = False


class Routed(NamedTuple):
    machine: int
    stage: str  # "passed", "container" or "containerized"
    inner_job: Optional[JobEvent]  # job released to the inner instance, if any


class ContainerWrapper:
    """Caps the number of jobs per size class seen by an inner algorithm.

    Once ``cap`` jobs of a class have reached the inner instance, the next job
    of that class triggers a container job of size about eps^2 * OPT, which
    is released to the inner algorithm in its place; following jobs no larger
    than the trigger are packed onto the container's machine until the next
    one would overflow it. Only the newest container accepts jobs.
    """

    def __init__(self, params: SchemeParams, inner: Algorithm, opt_budget: int = DEFAULT_OPT_BUDGET):
        self.params = params
        self.inner = inner
        self.opt_budget = opt_budget
        self.inner_config = Configuration()
        self.counts: dict[int, int] = {}
        self.containers: list[Container] = []
        self.outer_volume = [Fraction(0)] * params.m
        self._next_index = 0

    @property
    def open_container(self) -> Optional[Container]:
        if self.containers and not self.containers[-1].closed:
            return self.containers[-1]
        return None

    def _release_inner(self, size_exp: int) -> tuple[JobEvent, int]:
        self.counts[size_exp] = self.counts.get(size_exp, 0) + 1
        cfg = self.inner_config.release(size_exp)
        machine = self.inner(cfg)
        if not 1 <= machine <= self.params.m:
            raise ValueError(f"inner algorithm chose machine {machine} outside 1..{self.params.m}")
        self.inner_config = cfg.place(machine)
        return cfg.pending, machine

    def _container_exp(self, k: int) -> int:
        jobs = dict(self.counts)
        jobs[k] = jobs.get(k, 0) + 1
        n = sum(jobs.values())
        params = self.params
        if n <= self.opt_budget:
            opt = exact_makespan(jobs, params, self.opt_budget)
        else:
            opt = opt_lower_bound(jobs, params)
        c = max(k, ceil_log(params.eps**2 * opt, params.base))
        if self.counts.get(c, 0) >= params.cap and n > self.opt_budget:
            # lower bound made the container too small; escalate
            opt = exact_makespan(jobs, params, budget=n)
            c = max(k, ceil_log(params.eps**2 * opt, params.base))
        while self.counts.get(c, 0) >= params.cap:
            c += 1
        return c

    def route(self, job: JobEvent) -> Routed:
        params = self.params
        size = params.size(job.size_exp)
        box = self.open_container
        if box is not None and job.size_exp <= box.trigger_exp:
            if box.filled + size <= params.size(box.size_exp):
                box.filled += size
                self.outer_volume[box.machine - 1] += size
                return Routed(box.machine, "container", None)
            box.closed = True
        if self.counts.get(job.size_exp, 0) < params.cap:
            inner_job, machine = self._release_inner(job.size_exp)
            self.outer_volume[machine - 1] += size
            return Routed(machine, "passed", inner_job)
        c = self._container_exp(job.size_exp)
        for old in self.containers:
            old.closed = True
        inner_job, machine = self._release_inner(c)
        self.containers.append(Container(c, job.size_exp, machine, size))
        self.outer_volume[machine - 1] += size
        return Routed(machine, "containerized", inner_job)

    def inner_volume(self) -> list[Fraction]:
        vol = [Fraction(0)] * self.params.m
        for job, i in zip(self.inner_config.jobs, self.inner_config.chi):
            vol[i - 1] += self.params.size(job.size_exp)
        return vol


def wrap_container(
    stream: Iterable[JobEvent], params: SchemeParams, inner: Algorithm, opt_budget: int = DEFAULT_OPT_BUDGET
) -> tuple[list[Routed], Configuration]:
    """Run ``stream`` through a :class:`ContainerWrapper`.

    Returns the per-job routing and the inner configuration, whose jobs form
    the transformed instance.
    """
    wrapper = ContainerWrapper(params, inner, opt_budget)
    routed = [wrapper.route(job) for job in stream]
    return routed, wrapper.inner_config
