"""Slow, obviously-correct reference implementations used only by the tests."""

from __future__ import annotations

from collections import deque
from fractions import Fraction
from itertools import product

from crscheme.canonical import adversary_moves, canonical_key, empty_key, key_ratio, place, release
from crscheme.model import Configuration, JobEvent


def brute_makespan(sizes, speeds) -> Fraction:
    """Minimum makespan by trying every assignment."""
    sizes = [Fraction(p) for p in sizes]
    speeds = [Fraction(v) for v in speeds]
    if not sizes:
        return Fraction(0)
    best = None
    for assign in product(range(len(speeds)), repeat=len(sizes)):
        vol = [Fraction(0)] * len(speeds)
        for p, i in zip(sizes, assign):
            vol[i] += p
        ms = max(v / s for v, s in zip(vol, speeds))
        if best is None or ms < best:
            best = ms
    return best


def value_iteration(params) -> Fraction:
    """Game value as the least fixed point of V = max(ratio, max_d min_i V).

    Starting from the immediate ratios and iterating to convergence on the
    finite graph gives the value of the sup-payoff game.
    """
    root = empty_key(params)
    adv = {root: []}
    queue = deque([root])
    while queue:
        key = queue.popleft()
        for d in adversary_moves(key, params):
            pk = release(key, d, params)
            succ = [place(pk, i, params) for i in range(1, params.m + 1)]
            adv[key].append(succ)
            for nk in succ:
                if nk not in adv:
                    adv[nk] = []
                    queue.append(nk)
    base = {k: (key_ratio(k, params) or Fraction(0)) for k in adv}
    val = dict(base)
    changed = True
    while changed:
        changed = False
        for k, options in adv.items():
            v = max([base[k]] + [min(val[n] for n in succ) for succ in options])
            if v != val[k]:
                val[k] = v
                changed = True
    return val[root] if val[root] else Fraction(1)


def _normalize(cfg: Configuration, params) -> Configuration:
    """Shift to phase 0, drop irrelevant jobs, sort and renumber (keeps machine labels)."""
    top = max(j.size_exp for j in cfg.jobs)
    keep = sorted((i, j.size_exp - top) for j, i in zip(cfg.jobs, cfg.chi) if j.size_exp >= top - params.s)
    jobs = tuple(JobEvent(n, e) for n, (_, e) in enumerate(keep, start=1))
    return Configuration(jobs, tuple(i for i, _ in keep))


def concrete_reachable_keys(params) -> set:
    """Every key reachable by concrete plays, found without the key-level transitions.

    States are labeled configurations normalized to phase 0; the adversary
    releases any exponent under the cap inside the window or jumps up by
    1..s+1.
    """
    start = Configuration()
    seen_keys = {canonical_key(start, params)}
    seen = set()
    queue = deque([start])
    while queue:
        cfg = queue.popleft()
        if cfg.is_empty:
            exps = [0]
        else:
            counts: dict[int, int] = {}
            for j in cfg.jobs:
                counts[j.size_exp] = counts.get(j.size_exp, 0) + 1
            exps = [e for e in range(-params.s, 1) if counts.get(e, 0) < params.cap]
            exps += list(range(1, params.s + 2))
        for e in exps:
            pend = cfg.release(e)
            seen_keys.add(canonical_key(pend, params))
            for i in range(1, params.m + 1):
                nc = _normalize(pend.place(i), params)
                if nc not in seen:
                    seen.add(nc)
                    seen_keys.add(canonical_key(nc, params))
                    queue.append(nc)
    return seen_keys
