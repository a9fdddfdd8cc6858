"""Phases, relevant jobs and canonical keys of configurations.

A key stores, relative to the phase (largest exponent present), the
multiset of relevant size offsets on every machine, the pending job's offset
and per-offset release counts. Machines of equal speed are sorted so that
relabeling them does not change the key. The module also provides the key
level transitions used by the game solver.
"""

from __future__ import annotations

from collections import Counter, deque
from fractions import Fraction
from typing import NamedTuple, Optional

from .model import Configuration, JobEvent, SchemeParams
from .offline import exact_makespan

Pairs = tuple[tuple[int, int], ...]  # (offset, count), offsets descending, counts > 0

_END = (1 << 30, 0)


class CanonicalKey(NamedTuple):
    pending: Optional[int]
    machines: tuple[Pairs, ...]
    released: Pairs

    @property
    def empty(self) -> bool:
        return self.pending is None and not self.released


class ClassBudgetExceeded(RuntimeError):
    def __init__(self, count: int, limit: int):
        super().__init__(f"more than {limit} reachable classes (explored {count})")
        self.count = count
        self.limit = limit


def empty_key(params: SchemeParams) -> CanonicalKey:
    return CanonicalKey(None, ((),) * params.m, ())


def phase_of(config: Configuration) -> int:
    exps = [j.size_exp for j in config.jobs]
    if config.pending is not None:
        exps.append(config.pending.size_exp)
    if not exps:
        raise ValueError("an empty configuration has no phase")
    return max(exps)


def relevant_set(config: Configuration, params: SchemeParams) -> tuple[JobEvent, ...]:
    """Jobs (pending one included) no smaller than base**(phase - s)."""
    low = phase_of(config) - params.s
    jobs = list(config.jobs)
    if config.pending is not None:
        jobs.append(config.pending)
    return tuple(j for j in jobs if j.size_exp >= low)


def _pairs(counter) -> Pairs:
    return tuple(sorted(((o, c) for o, c in counter.items() if c), reverse=True))


def _order_key(pairs: Pairs):
    # more jobs at the top offsets sorts first
    return tuple((-o, -c) for o, c in pairs) + (_END,)


def _canonical_order(machines, params: SchemeParams) -> list[int]:
    order = []
    for lo, hi in params.speed_blocks:
        order.extend(sorted(range(lo, hi), key=lambda i: (_order_key(machines[i]), i)))
    return order


def canonical_form(config: Configuration, params: SchemeParams) -> tuple[CanonicalKey, tuple[int, ...]]:
    """Key of ``config`` plus, per canonical position, the actual 1-based machine."""
    if config.is_empty:
        return empty_key(params), tuple(range(1, params.m + 1))
    k = phase_of(config)
    low = k - params.s
    per_machine = [Counter() for _ in range(params.m)]
    released = Counter()
    for job, i in zip(config.jobs, config.chi):
        if job.size_exp >= low:
            per_machine[i - 1][job.size_exp - k] += 1
            released[job.size_exp - k] += 1
    pending = None
    if config.pending is not None:
        pending = config.pending.size_exp - k
        if pending < -params.s:
            raise ValueError("pending job lies below the relevance window")
        released[pending] += 1
    machines = [_pairs(c) for c in per_machine]
    order = _canonical_order(machines, params)
    key = CanonicalKey(pending, tuple(machines[i] for i in order), _pairs(released))
    return key, tuple(i + 1 for i in order)


def canonical_key(config: Configuration, params: SchemeParams) -> CanonicalKey:
    return canonical_form(config, params)[0]


def _sorted_key(pending, machines, released, params: SchemeParams) -> CanonicalKey:
    order = _canonical_order(machines, params)
    return CanonicalKey(pending, tuple(machines[i] for i in order), released)


def _add(pairs: Pairs, off: int) -> Pairs:
    d = dict(pairs)
    d[off] = d.get(off, 0) + 1
    return tuple(sorted(d.items(), reverse=True))


def _shift(pairs: Pairs, d: int, s: int) -> Pairs:
    return tuple((o - d, c) for o, c in pairs if o - d >= -s)


def released_count(key: CanonicalKey, off: int) -> int:
    return dict(key.released).get(off, 0)


def release(key: CanonicalKey, d: int, params: SchemeParams) -> CanonicalKey:
    """Key after the adversary releases a job at offset ``d`` from the phase.

    Offsets above 0 start a new phase; anything above s + 1 behaves exactly
    like s + 1 since no earlier job stays relevant.
    """
    if key.pending is not None:
        raise ValueError("key already has a pending job")
    if key.empty:
        return CanonicalKey(0, key.machines, ((0, 1),))
    if d <= 0:
        if d < -params.s:
            raise ValueError(f"offset {d} lies below the relevance window")
        return CanonicalKey(d, key.machines, _add(key.released, d))
    s = params.s
    machines = [_shift(p, d, s) for p in key.machines]
    released = _add(_shift(key.released, d, s), 0)
    return _sorted_key(0, machines, released, params)


def place(key: CanonicalKey, machine: int, params: SchemeParams) -> CanonicalKey:
    """Key after the pending job goes to canonical machine ``machine`` (1-based)."""
    if key.pending is None:
        raise ValueError("key has no pending job")
    machines = list(key.machines)
    machines[machine - 1] = _add(machines[machine - 1], key.pending)
    return _sorted_key(None, machines, key.released, params)


def adversary_moves(key: CanonicalKey, params: SchemeParams) -> list[int]:
    """Offsets the adversary may release next, in increasing order."""
    if key.pending is not None:
        raise ValueError("adversary moves are defined on keys without a pending job")
    if key.empty:
        return [0]
    counts = dict(key.released)
    moves = [d for d in range(-params.s, 1) if counts.get(d, 0) < params.cap]
    moves.extend(range(1, params.s + 2))
    return moves


def machine_volumes(key: CanonicalKey, params: SchemeParams) -> list[Fraction]:
    """Relevant volume per canonical machine in units of base**phase."""
    return [sum((c * params.size(o) for o, c in pairs), Fraction(0)) for pairs in key.machines]


def key_makespan(key: CanonicalKey, params: SchemeParams) -> Fraction:
    vols = machine_volumes(key, params)
    return max(v / sp for v, sp in zip(vols, params.speed_values))


def assigned_multiset(key: CanonicalKey) -> dict[int, int]:
    jobs: dict[int, int] = {}
    for pairs in key.machines:
        for o, c in pairs:
            jobs[o] = jobs.get(o, 0) + c
    return jobs


def key_ratio(key: CanonicalKey, params: SchemeParams) -> Optional[Fraction]:
    """MS/OPT over the relevant assigned jobs; None for a key with nothing assigned."""
    jobs = assigned_multiset(key)
    if not jobs:
        return None
    budget = max(24, sum(jobs.values()))
    return key_makespan(key, params) / exact_makespan(jobs, params, budget)


def representative(key: CanonicalKey, params: SchemeParams, phase: int = 0) -> Configuration:
    """A concrete configuration in ``phase`` whose key is ``key``."""
    jobs = []
    for i, pairs in enumerate(key.machines, start=1):
        for o, c in pairs:
            jobs.extend([(phase + o, i)] * c)
    cfg = Configuration(
        tuple(JobEvent(n, e) for n, (e, _) in enumerate(jobs, start=1)),
        tuple(i for _, i in jobs),
    )
    if key.pending is not None:
        cfg = cfg.release(phase + key.pending)
    return cfg


def count_reachable_classes(params: SchemeParams) -> int:
    """Number of keys (with and without a pending job) reachable in the game."""
    start = empty_key(params)
    seen = {start}
    queue = deque([start])
    while queue:
        key = queue.popleft()
        if key.pending is None:
            succ = [release(key, d, params) for d in adversary_moves(key, params)]
        else:
            succ = [place(key, i, params) for i in range(1, params.m + 1)]
        for nxt in succ:
            if nxt not in seen:
                seen.add(nxt)
                if len(seen) > params.max_states:
                    raise ClassBudgetExceeded(len(seen), params.max_states)
                queue.append(nxt)
    return len(seen)
