"""The adversary-versus-algorithm game on canonical keys.

Adversary nodes are keys without a pending job; the adversary picks the
next job's offset. Algorithm nodes carry a pending job; the algorithm picks a
machine. The payoff of a play is the largest MS/OPT ratio seen at any
adversary node, since the adversary may stop whenever it likes.

Values are computed for all nodes at once by lowering a threshold through
the sorted set of realized ratios and growing the adversary's attractor
incrementally: a node's value is the last threshold at which it was still
safe for the algorithm.
"""

from __future__ import annotations

import logging
import sys
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Union

from .canonical import (
    CanonicalKey,
    adversary_moves,
    canonical_form,
    empty_key,
    key_ratio,
    machine_volumes,
    place,
    release,
)
from .model import Configuration, SchemeParams

log = logging.getLogger(__name__)

SOLVER_VERSION = "1"

KeyPolicy = Callable[[CanonicalKey], int]


class GameBudgetExceeded(RuntimeError):
    def __init__(self, message: str, lower_bound: Optional[Fraction] = None, states: int = 0):
        super().__init__(message)
        self.lower_bound = lower_bound
        self.states = states


class WitnessError(ValueError):
    """A witness has no move for a key met during replay."""


# ---------------------------------------------------------------- policies


def default_rule(key: CanonicalKey, params: SchemeParams) -> int:
    """Least relevant execution-time load, lowest index."""
    vols = machine_volumes(key, params)
    sp = params.speed_values
    return min(range(params.m), key=lambda i: (vols[i] / sp[i], i)) + 1


def graham_rule(key: CanonicalKey, params: SchemeParams) -> int:
    """Earliest finish of the pending job on relevant loads, lowest index."""
    vols = machine_volumes(key, params)
    sp = params.speed_values
    p = params.size(key.pending)
    return min(range(params.m), key=lambda i: ((vols[i] + p) / sp[i], i)) + 1


def baseline_policy(name: str, params: SchemeParams) -> KeyPolicy:
    """Key-level baseline by name: ``default``, ``graham`` or ``fixed:<i>``."""
    if name == "default":
        return lambda key: default_rule(key, params)
    if name == "graham":
        return lambda key: graham_rule(key, params)
    if name.startswith("fixed:"):
        i = int(name.split(":", 1)[1])
        if not 1 <= i <= params.m:
            raise ValueError(f"fixed machine {i} outside 1..{params.m}")
        return lambda key: i
    raise ValueError(f"unknown baseline {name!r}")


@dataclass
class AlgorithmMap:
    """Decision table from canonical keys (with a pending job) to canonical machines.

    Keys outside the table fall back to :func:`default_rule`. Calling the map
    on a concrete configuration translates the canonical decision back to an
    actual machine.
    """

    params: SchemeParams
    table: dict[CanonicalKey, int] = field(default_factory=dict)
    meta: dict[str, str] = field(default_factory=dict)

    def decide(self, key: CanonicalKey) -> int:
        choice = self.table.get(key)
        if choice is None:
            return default_rule(key, self.params)
        return choice

    def __call__(self, config: Configuration) -> int:
        key, perm = canonical_form(config, self.params)
        return perm[self.decide(key) - 1]


def as_key_policy(alg: Union[AlgorithmMap, KeyPolicy]) -> KeyPolicy:
    return alg.decide if isinstance(alg, AlgorithmMap) else alg


@dataclass
class AdversaryWitness:
    """Positional adversary strategy: key without pending job -> offset, or None to stop.

    Against every algorithm the play reaches a stop whose ratio is at least
    ``value``.
    """

    params: SchemeParams
    value: Fraction
    moves: dict[CanonicalKey, Optional[int]] = field(default_factory=dict)


@dataclass
class GameResult:
    value: Fraction
    map: AlgorithmMap
    witness: AdversaryWitness
    classes: int
    params: SchemeParams
    authoritative: bool = True
    lower_bound: Optional[Fraction] = None


@dataclass
class Evaluation:
    value: Fraction
    witness: AdversaryWitness
    states: int
    complete: bool = True
    keys: frozenset = frozenset()  # adversary keys reachable under the map


# ---------------------------------------------------------------- graph


@dataclass
class GameGraph:
    params: SchemeParams
    adv: list[CanonicalKey] = field(default_factory=list)
    alg: list[CanonicalKey] = field(default_factory=list)
    adv_moves: list[list[tuple[int, int]]] = field(default_factory=list)  # (offset, alg id)
    alg_succ: list[list[int]] = field(default_factory=list)  # adv id per canonical machine
    ratio: list[Optional[Fraction]] = field(default_factory=list)
    complete: bool = True

    @property
    def size(self) -> int:
        return len(self.adv) + len(self.alg)


def _ratios(keys: list[CanonicalKey], params: SchemeParams, workers: int) -> list[Optional[Fraction]]:
    if workers <= 1 or len(keys) < 64:
        return [key_ratio(k, params) for k in keys]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda k: key_ratio(k, params), keys, chunksize=64))


def build_graph(params: SchemeParams, workers: int = 1) -> GameGraph:
    """Breadth-first exploration of every reachable key, up to ``params.max_states``.

    When the budget runs out the graph is cut so that it under-approximates
    the adversary only: algorithm nodes always keep all their successors,
    the adversary node being expanded keeps the moves seen so far, and
    unexpanded adversary nodes get no ratio. Solving a cut graph therefore
    gives a lower bound on the true value.
    """
    g = GameGraph(params)
    adv_id: dict[CanonicalKey, int] = {}
    alg_id: dict[CanonicalKey, int] = {}

    def add_adv(key):
        adv_id[key] = len(g.adv)
        g.adv.append(key)
        g.adv_moves.append([])
        return adv_id[key]

    add_adv(empty_key(params))
    queue = deque([0])
    expanded = []
    m = params.m
    while queue and g.complete:
        a = queue.popleft()
        expanded.append(a)
        key = g.adv[a]
        moves = g.adv_moves[a]
        for d in adversary_moves(key, params):
            pk = release(key, d, params)
            p = alg_id.get(pk)
            if p is None:
                p = alg_id[pk] = len(g.alg)
                g.alg.append(pk)
                succ = []
                for i in range(1, m + 1):
                    nk = place(pk, i, params)
                    n = adv_id.get(nk)
                    if n is None:
                        n = add_adv(nk)
                        queue.append(n)
                    succ.append(n)
                g.alg_succ.append(succ)
            moves.append((d, p))
            if g.size > params.max_states:
                g.complete = False
                break
    if g.complete:
        g.ratio = _ratios(g.adv, params, workers)
    else:
        g.ratio = [None] * len(g.adv)
        for a, r in zip(expanded, _ratios([g.adv[a] for a in expanded], params, workers)):
            g.ratio[a] = r
    return g


@dataclass
class _Solution:
    adv_value: list[Optional[Fraction]]
    alg_value: list[Optional[Fraction]]
    adv_rank: list[Optional[int]]
    alg_rank: list[Optional[int]]


def _solve_graph(g: GameGraph) -> _Solution:
    n_adv, n_alg = len(g.adv), len(g.alg)
    adv_preds: list[list[int]] = [[] for _ in range(n_adv)]
    alg_preds: list[list[int]] = [[] for _ in range(n_alg)]
    counter = [0] * n_alg
    for p, succ in enumerate(g.alg_succ):
        distinct = sorted(set(succ))
        counter[p] = len(distinct)
        for a in distinct:
            adv_preds[a].append(p)
    for a, moves in enumerate(g.adv_moves):
        for p in sorted({p for _, p in moves}):
            alg_preds[p].append(a)

    adv_value: list[Optional[Fraction]] = [None] * n_adv
    alg_value: list[Optional[Fraction]] = [None] * n_alg
    adv_rank: list[Optional[int]] = [None] * n_adv
    alg_rank: list[Optional[int]] = [None] * n_alg
    rank = 0

    by_ratio: dict[Fraction, list[int]] = {}
    for a, r in enumerate(g.ratio):
        if r is not None:
            by_ratio.setdefault(r, []).append(a)

    for r in sorted(by_ratio, reverse=True):
        queue = deque()
        for a in by_ratio[r]:
            if adv_value[a] is None:
                adv_value[a] = r
                adv_rank[a] = rank
                rank += 1
                queue.append(a)
        while queue:
            a = queue.popleft()
            for p in adv_preds[a]:
                if alg_value[p] is not None:
                    continue
                counter[p] -= 1
                if counter[p] == 0:
                    alg_value[p] = r
                    alg_rank[p] = rank
                    rank += 1
                    for q in alg_preds[p]:
                        if adv_value[q] is None:
                            adv_value[q] = r
                            adv_rank[q] = rank
                            rank += 1
                            queue.append(q)
    return _Solution(adv_value, alg_value, adv_rank, alg_rank)


def _extract_map(g: GameGraph, sol: _Solution) -> AlgorithmMap:
    table = {}
    for p, succ in enumerate(g.alg_succ):
        if not succ:
            continue
        vals = [sol.adv_value[a] for a in succ]
        low = min((v for v in vals if v is not None), default=None)
        # a successor never eliminated is safe at every threshold
        best = next((i for i, v in enumerate(vals) if v is None), None)
        if best is None:
            best = vals.index(low)
        table[g.alg[p]] = best + 1
    meta = {"solver": SOLVER_VERSION}
    return AlgorithmMap(g.params, table, meta)


def _extract_witness(g: GameGraph, sol: _Solution, value: Fraction) -> AdversaryWitness:
    def losing(v):
        return v is not None and v >= value

    moves: dict[CanonicalKey, Optional[int]] = {}
    queue = deque([0])
    seen = {0}
    while queue:
        a = queue.popleft()
        r = g.ratio[a]
        if r is not None and r >= value:
            moves[g.adv[a]] = None
            continue
        rank = sol.adv_rank[a]
        choice = None
        for d, p in g.adv_moves[a]:
            if losing(sol.alg_value[p]) and sol.alg_rank[p] < rank:
                choice = (d, p)
                break
        if choice is None:
            raise AssertionError("attractor node without an earlier-eliminated move")
        d, p = choice
        moves[g.adv[a]] = d
        for n in g.alg_succ[p]:
            if n not in seen:
                seen.add(n)
                queue.append(n)
    return AdversaryWitness(g.params, value, moves)


def _partial_lower_bound(g: GameGraph, sol: _Solution) -> Fraction:
    v = sol.adv_value[0]
    return v if v is not None else Fraction(1)


def solve_value(params: SchemeParams, workers: int = 1) -> GameResult:
    """Exact value of the restricted game with an optimal map and a witness.

    If exploration exceeds ``params.max_states`` the result is flagged
    non-authoritative: unexplored nodes are scored by their own ratio only,
    which yields a valid lower bound but no witness worth trusting.
    """
    g = build_graph(params, workers)
    sol = _solve_graph(g)
    if not g.complete:
        lb = _partial_lower_bound(g, sol)
        log.warning("state budget %d exceeded; value is at least %s", params.max_states, lb)
        return GameResult(
            value=lb,
            map=_extract_map(g, sol),
            witness=AdversaryWitness(params, lb, {}),
            classes=g.size,
            params=params,
            authoritative=False,
            lower_bound=lb,
        )
    value = sol.adv_value[0]
    return GameResult(
        value=value,
        map=_extract_map(g, sol),
        witness=_extract_witness(g, sol, value),
        classes=g.size,
        params=params,
        lower_bound=value,
    )


# ---------------------------------------------------------------- fixed maps


def evaluate_map(alg: Union[AlgorithmMap, KeyPolicy], params: SchemeParams) -> Evaluation:
    """Worst ratio over all keys reachable when ``alg`` plays against a free adversary."""
    policy = as_key_policy(alg)
    root = empty_key(params)
    parent: dict[CanonicalKey, Optional[tuple[CanonicalKey, int]]] = {root: None}
    queue = deque([root])
    best, worst = None, root
    count = 1
    complete = True
    while queue:
        key = queue.popleft()
        for d in adversary_moves(key, params):
            pk = release(key, d, params)
            choice = policy(pk)
            if not 1 <= choice <= params.m:
                raise ValueError(f"policy chose machine {choice} outside 1..{params.m}")
            nk = place(pk, choice, params)
            if nk in parent:
                continue
            parent[nk] = (key, d)
            count += 2
            r = key_ratio(nk, params)
            if best is None or r > best:
                best, worst = r, nk
            if count > params.max_states:
                complete = False
                queue.clear()
                break
            queue.append(nk)
    moves: dict[CanonicalKey, Optional[int]] = {worst: None}
    node = worst
    while parent[node] is not None:
        prev, d = parent[node]
        moves[prev] = d
        node = prev
    value = best if best is not None else Fraction(1)
    return Evaluation(value, AdversaryWitness(params, value, moves), count, complete, frozenset(parent))


def replay_witness(
    witness: AdversaryWitness,
    alg: Union[AlgorithmMap, KeyPolicy, Callable[[Configuration], int]],
    params: SchemeParams,
    concrete: bool = False,
) -> Fraction:
    """Play ``witness`` against ``alg`` and return the largest ratio visited.

    With ``concrete=True`` the algorithm is called on actual configurations
    (so it may look at jobs a key forgets); otherwise it is a key policy or
    an :class:`AlgorithmMap`.
    """
    key = empty_key(params)
    config = Configuration()
    phase = 0
    visited = set()
    best = None
    policy = None if concrete else as_key_policy(alg)
    while True:
        if key in visited:
            raise WitnessError("witness revisits a key; strategy does not terminate")
        visited.add(key)
        if key not in witness.moves:
            raise WitnessError(f"witness has no move for key {key}")
        d = witness.moves[key]
        if d is None:
            return best if best is not None else Fraction(1)
        pk = release(key, d, params)
        if concrete:
            if key.empty:
                phase, exp = 0, 0
            elif d <= 0:
                exp = phase + d
            else:
                phase += d
                exp = phase
            config = config.release(exp)
            machine = alg(config)
            ck, perm = canonical_form(config, params)
            assert ck == pk
            choice = perm.index(machine) + 1
            config = config.place(machine)
        else:
            choice = policy(pk)
        key = place(pk, choice, params)
        r = key_ratio(key, params)
        best = r if best is None else max(best, r)


# ---------------------------------------------------------------- brute force


class EnumerationBudgetExceeded(RuntimeError):
    pass


def enumerate_maps_bruteforce(params: SchemeParams, max_keys: int = 50_000, max_maps: int = 2_000_000) -> Fraction:
    """Minimum over algorithm maps of their worst reachable ratio, by exhaustive search.

    Maps are enumerated lazily: a decision is only branched on once its key
    becomes reachable under the decisions made so far, and branches whose
    running maximum (or the unavoidable next ratio of some reachable key)
    already matches the best complete map are cut. ``max_maps`` bounds the
    number of partial maps visited. This shares the key transitions with the
    solver but none of its fixed-point machinery.
    """
    root = empty_key(params)
    adv_ids = {root: 0}
    adv_keys = [root]
    adv_next: list[list[int]] = []
    alg_ids: dict[CanonicalKey, int] = {}
    options: list[list[int]] = []
    i = 0
    while i < len(adv_keys):
        key = adv_keys[i]
        nxt = []
        for d in adversary_moves(key, params):
            pk = release(key, d, params)
            if pk not in alg_ids:
                alg_ids[pk] = len(options)
                succ = []
                for machine in range(1, params.m + 1):
                    nk = place(pk, machine, params)
                    if nk not in adv_ids:
                        adv_ids[nk] = len(adv_keys)
                        adv_keys.append(nk)
                    if adv_ids[nk] not in succ:
                        succ.append(adv_ids[nk])
                options.append(succ)
            nxt.append(alg_ids[pk])
        adv_next.append(nxt)
        if len(adv_keys) + len(options) > max_keys:
            raise EnumerationBudgetExceeded(f"more than {max_keys} keys")
        i += 1

    values = [key_ratio(k, params) or Fraction(0) for k in adv_keys]
    # only the order of ratios matters to the search
    levels = sorted(set(values))
    rank = {v: i for i, v in enumerate(levels)}
    ratio = [rank[v] for v in values]
    # two-ply local bound: the algorithm's best immediate ratio, then the
    # adversary's best reply against that
    one = [min(ratio[a] for a in succ) for succ in options]
    after = [max([ratio[a]] + [one[q] for q in adv_next[a]]) for a in range(len(adv_keys))]
    for succ in options:
        succ.sort(key=lambda a: (after[a], ratio[a], a))
    floor = [after[succ[0]] for succ in options]

    reached_adv = [False] * len(adv_keys)
    frontier: set[int] = set()
    decided: set[int] = set()
    best = len(levels)
    visited = 0

    def reach(a: int, trail: list) -> int:
        top = 0
        stack = [a]
        while stack:
            x = stack.pop()
            if reached_adv[x]:
                continue
            reached_adv[x] = True
            trail.append(x)
            if ratio[x] > top:
                top = ratio[x]
            for q in adv_next[x]:
                if q not in frontier and q not in decided:
                    frontier.add(q)
                    trail.append(~q)
        return top

    def undo(trail: list) -> None:
        for x in reversed(trail):
            if x >= 0:
                reached_adv[x] = False
            else:
                frontier.discard(~x)

    def search(cur: int) -> None:
        nonlocal best, visited
        visited += 1
        if visited > max_maps:
            raise EnumerationBudgetExceeded(f"more than {max_maps} partial maps visited")
        if cur >= best:
            return
        if not frontier:
            best = cur
            return
        p = max(frontier, key=lambda q: (floor[q], -q))
        if max(cur, floor[p]) >= best:
            return
        frontier.discard(p)
        decided.add(p)
        for a in options[p]:
            if after[a] >= best:
                break
            trail: list = []
            top = reach(a, trail)
            search(max(cur, top))
            undo(trail)
        decided.discard(p)
        frontier.add(p)

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * len(options) + 1000))
    try:
        search(reach(0, []))
    finally:
        sys.setrecursionlimit(limit)
    log.debug("brute force visited %d partial maps", visited)
    return levels[best]
