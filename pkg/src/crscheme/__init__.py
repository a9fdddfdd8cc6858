"""Competitive-ratio approximation for online makespan scheduling.

Restricts online instances (rounded sizes, a relevance window, a per-size
cap) so the online game has finitely many canonical states, then solves that
game exactly in rational arithmetic.
"""

from .canonical import CanonicalKey, adversary_moves, canonical_form, canonical_key, count_reachable_classes
from .game import (
    AdversaryWitness,
    AlgorithmMap,
    GameResult,
    enumerate_maps_bruteforce,
    evaluate_map,
    replay_witness,
    solve_value,
)
from .model import Configuration, JobEvent, SchemeParams, make_params
from .offline import exact_makespan, exact_makespan_sizes, lower_bound_sizes
from .online import ExecutionTrace, run_online
from .transforms import filter_small, normalize_speeds, round_size, wrap_container

__all__ = [
    "AdversaryWitness",
    "AlgorithmMap",
    "CanonicalKey",
    "Configuration",
    "ExecutionTrace",
    "GameResult",
    "JobEvent",
    "SchemeParams",
    "adversary_moves",
    "canonical_form",
    "canonical_key",
    "count_reachable_classes",
    "enumerate_maps_bruteforce",
    "evaluate_map",
    "exact_makespan",
    "exact_makespan_sizes",
    "filter_small",
    "lower_bound_sizes",
    "make_params",
    "normalize_speeds",
    "replay_witness",
    "round_size",
    "run_online",
    "solve_value",
    "wrap_container",
]
