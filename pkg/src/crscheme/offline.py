"""Exact and lower-bound offline makespan oracles.

The exact oracle is a depth-first branch and bound over job placements.
Everything is scaled to integers first: job volumes by a common
denominator, machine finishing times by a per-machine integer weight
proportional to 1/speed.
"""

from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

from .model import SchemeParams

DEFAULT_OPT_BUDGET = 24

JobMultiset = Mapping[int, int]


class OracleBudgetExceeded(RuntimeError):
    """Raised when an exact query has more jobs than the oracle budget."""

    def __init__(self, jobs: int, budget: int):
        super().__init__(
            f"{jobs} jobs exceed the exact-oracle budget of {budget}; use opt_lower_bound instead"
        )
        self.jobs = jobs
        self.budget = budget


def multiset(exps: Iterable[int]) -> dict[int, int]:
    return dict(Counter(exps))


def _scale_sizes(sizes: Sequence[Fraction]) -> tuple[list[int], int]:
    den = math.lcm(*(p.denominator for p in sizes)) if sizes else 1
    return [int(p * den) for p in sizes], den


def _scale_speeds(speeds: Sequence[Fraction]) -> tuple[list[int], int]:
    # finish time of volume V on machine i, times `top`, equals V * weight[i]
    top = math.lcm(*(sp.numerator for sp in speeds))
    return [sp.denominator * (top // sp.numerator) for sp in speeds], top


def _branch_and_bound(vols: list[int], weights: list[int]) -> int:
    """Minimum over assignments of max_i load_i * weights[i]; vols sorted desc."""
    m = len(weights)
    n = len(vols)
    if n == 0:
        return 0
    total = sum(vols)
    inv = sum(Fraction(1, w) for w in weights)
    lower = max(math.ceil(Fraction(total) / inv), vols[0] * min(weights))

    # greedy incumbent: earliest finish for each job in order
    loads = [0] * m
    best = 0
    for v in vols:
        i = min(range(m), key=lambda k: ((loads[k] + v) * weights[k], k))
        loads[i] += v
        best = max(best, loads[i] * weights[i])
    if best == lower:
        return best

    loads = [0] * m

    def dfs(j: int, cur: int, first: int) -> bool:
        nonlocal best
        if j == n:
            best = cur
            return best == lower
        v = vols[j]
        nxt_same = j + 1 < n and vols[j + 1] == v
        seen = set()
        for i in range(first, m):
            sig = (loads[i], weights[i])
            if sig in seen:
                continue
            seen.add(sig)
            finish = (loads[i] + v) * weights[i]
            if finish >= best:
                continue
            loads[i] += v
            done = dfs(j + 1, max(cur, finish), i if nxt_same else 0)
            loads[i] -= v
            if done:
                return True
        return False

    dfs(0, 0, 0)
    return best


def exact_makespan_sizes(
    sizes: Sequence[Fraction],
    speeds: Sequence[Fraction],
    budget: int = DEFAULT_OPT_BUDGET,
) -> Fraction:
    """Exact minimum makespan of rational ``sizes`` on machines with ``speeds``."""
    if len(sizes) > budget:
        raise OracleBudgetExceeded(len(sizes), budget)
    if not sizes:
        return Fraction(0)
    vols, den = _scale_sizes(sorted(sizes, reverse=True))
    weights, top = _scale_speeds(speeds)
    return Fraction(_branch_and_bound(vols, weights), den * top)


def lower_bound_sizes(sizes: Sequence[Fraction], speeds: Sequence[Fraction]) -> Fraction:
    if not sizes:
        return Fraction(0)
    return max(max(sizes) / max(speeds), sum(sizes) / sum(speeds))


@lru_cache(maxsize=None)
def _exact_normalized(items: tuple[tuple[int, int], ...], speeds: tuple[int, ...], base: Fraction) -> Fraction:
    # items are shifted so the smallest exponent is 0
    top = max(k for k, _ in items)
    vols = []
    for k, c in sorted(items, reverse=True):
        v = base.numerator**k * base.denominator ** (top - k)
        vols.extend([v] * c)
    emax = max(speeds)
    weights = [
        base.denominator**e * base.numerator ** (emax - e) for e in speeds
    ]
    scaled = _branch_and_bound(vols, weights)
    return Fraction(scaled) / (base.denominator**top * base.numerator**emax)


def exact_makespan(
    jobs: JobMultiset, params: SchemeParams, budget: int = DEFAULT_OPT_BUDGET
) -> Fraction:
    """Exact OPT for a multiset ``{size exponent: count}`` under ``params``' speeds.

    Results are memoized on the multiset shifted to minimum exponent 0, so
    scaled copies of the same instance share one computation.
    """
    items = [(k, c) for k, c in jobs.items() if c > 0]
    n = sum(c for _, c in items)
    if n > budget:
        raise OracleBudgetExceeded(n, budget)
    if not items:
        return Fraction(0)
    low = min(k for k, _ in items)
    norm = tuple(sorted((k - low, c) for k, c in items))
    return _exact_normalized(norm, params.speeds, params.base) * params.base**low


def opt_lower_bound(jobs: JobMultiset, params: SchemeParams) -> Fraction:
    """max(p_max / s_max, p(J) / sum of speeds); never above OPT."""
    items = [(k, c) for k, c in jobs.items() if c > 0]
    if not items:
        return Fraction(0)
    speeds = params.speed_values
    p_max = params.size(max(k for k, _ in items))
    volume = sum(params.size(k) * c for k, c in items)
    return max(p_max / max(speeds), volume / sum(speeds))


def opt_estimate(jobs: JobMultiset, params: SchemeParams, budget: int = DEFAULT_OPT_BUDGET) -> tuple[Fraction, bool]:
    """Exact OPT when within budget, else the lower bound; second item says which."""
    try:
        return exact_makespan(jobs, params, budget), True
    except OracleBudgetExceeded:
        return opt_lower_bound(jobs, params), False
