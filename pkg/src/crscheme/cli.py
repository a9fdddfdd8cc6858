"""Command-line interface: solve, evaluate, simulate, replay and oracle."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .canonical import ClassBudgetExceeded
from .formats import (
    FormatError,
    ParamsMismatch,
    check_params,
    describe,
    dump_strategy,
    dump_witness,
    format_trace,
    load_strategy,
    load_witness,
    read_instance,
)
from .game import (
    AlgorithmMap,
    GameBudgetExceeded,
    WitnessError,
    baseline_policy,
    evaluate_map,
    replay_witness,
    solve_value,
)
from .model import ParamsError, SchemeParams, make_params, to_fraction
from .offline import DEFAULT_OPT_BUDGET, OracleBudgetExceeded, exact_makespan_sizes, lower_bound_sizes
from .online import graham_config, run_online

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_BUDGET = 3
EXIT_FORMAT = 4

log = logging.getLogger("crscheme")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _fraction_list(text: str) -> list[Fraction]:
    return [to_fraction(v.strip()) for v in text.split(",") if v.strip()]


def _add_param_flags(p: argparse.ArgumentParser, required: bool = False) -> None:
    p.add_argument("--m", type=int, required=required, help="number of machines")
    p.add_argument("--eps", help="accuracy, as a/b or an exact decimal")
    p.add_argument("--speeds", help="comma-separated raw machine speeds")
    p.add_argument("--s-override", type=int, dest="s", help="relevance window (default: theoretical)")
    p.add_argument("--cap-override", type=int, dest="cap", help="per-size cap (default: theoretical)")
    p.add_argument("--max-states", type=int, help="state budget for the game graph")


def _given(args) -> bool:
    return any(getattr(args, k, None) is not None for k in ("m", "eps", "speeds", "s", "cap"))


def _params(args, m: Optional[int] = None, speeds: Optional[Sequence] = None) -> SchemeParams:
    speeds = _fraction_list(args.speeds) if args.speeds else speeds
    m = args.m if args.m is not None else m
    if m is None:
        if speeds is None:
            raise CliError("--m is required", EXIT_INVALID)
        m = len(speeds)
    eps = args.eps if args.eps is not None else "1"
    return make_params(eps, m, speeds=speeds, s=args.s, cap=args.cap, max_states=args.max_states)


def _print_value(label: str, x: Fraction) -> None:
    print(f"{label} = {describe(x)}")


def _write(path, text: str) -> None:
    Path(path).write_text(text)
    log.info("wrote %s", path)


def _load_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_INVALID) from None


def _pick_algorithm(args, params: Optional[SchemeParams]):
    """Return (params, key policy or map, label) from --strategy / --baseline."""
    if args.strategy:
        sf = load_strategy(_load_text(args.strategy))
        if params is not None:
            check_params(sf.params, params)
        return sf.params, sf.map, f"strategy {args.strategy}"
    if params is None:
        raise CliError("parameters are required with --baseline", EXIT_INVALID)
    return params, args.baseline, f"baseline {args.baseline}"


# ---------------------------------------------------------------- commands


def cmd_solve(args) -> int:
    params = _params(args)
    print(f"params: m={params.m} eps={params.eps} s={params.s} cap={params.cap} speeds={list(params.speeds)}")
    start = time.perf_counter()
    result = solve_value(params, workers=args.threads)
    wall = time.perf_counter() - start
    if not result.authoritative:
        _print_value("rho' lower bound", result.lower_bound)
        print(f"classes explored: {result.classes} (budget {params.max_states} exceeded)")
        print(f"wall time: {wall:.2f}s")
        return EXIT_BUDGET
    _print_value("rho'", result.value)
    print(f"classes: {result.classes}")
    print(f"wall time: {wall:.2f}s")
    if args.out:
        _write(args.out, dump_strategy(result))
        _write(args.witness_out or f"{args.out}.witness", dump_witness(result.witness))
    elif args.witness_out:
        _write(args.witness_out, dump_witness(result.witness))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    given = _params(args) if _given(args) else None
    params, alg, label = _pick_algorithm(args, given)
    if isinstance(alg, str):
        alg = baseline_policy(alg, params)
    ev = evaluate_map(alg, params)
    if not ev.complete:
        _print_value("rho-bar lower bound", ev.value)
        print(f"states explored: {ev.states} (budget {params.max_states} exceeded)")
        return EXIT_BUDGET
    print(f"evaluated: {label}")
    _print_value("rho-bar", ev.value)
    print(f"states: {ev.states}")
    if args.witness_out:
        _write(args.witness_out, dump_witness(ev.witness))
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        inst = read_instance(args.instance)
    except OSError as exc:
        raise CliError(f"cannot read {args.instance}: {exc.strerror}", EXIT_INVALID) from None
    params = None
    if args.baseline or _given(args) or inst.m is not None or inst.speeds is not None:
        if args.m is not None and inst.m is not None and args.m != inst.m:
            raise CliError(f"--m {args.m} disagrees with instance header m={inst.m}", EXIT_INVALID)
        params = _params(args, m=inst.m, speeds=inst.speeds)
    params, alg, label = _pick_algorithm(args, None if args.strategy and not _given(args) else params)
    if alg == "default":
        alg = AlgorithmMap(params)
    trace = run_online(alg, inst.sizes, params, opt_budget=args.opt_budget)
    report = format_trace(trace)
    if args.report:
        _write(args.report, report)
        print(report.splitlines()[-1])
    else:
        sys.stdout.write(report)
    return EXIT_OK


def cmd_replay(args) -> int:
    witness = load_witness(_load_text(args.witness))
    params, alg, label = _pick_algorithm(args, witness.params)
    if alg == "graham-list":
        realized = replay_witness(witness, graham_config(params), params, concrete=True)
        _print_value("realized", realized)
        _print_value("witness value", witness.value)
        print("(configuration algorithm: reported only)")
        return EXIT_OK
    if isinstance(alg, str):
        alg = baseline_policy(alg, params)
    realized = replay_witness(witness, alg, params)
    _print_value("realized", realized)
    _print_value("witness value", witness.value)
    if realized < witness.value:
        print("witness guarantee violated", file=sys.stderr)
        return 1
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        jobs = _fraction_list(args.jobs)
        speeds = _fraction_list(args.speeds) if args.speeds else [Fraction(1)] * (args.m or 1)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INVALID) from None
    if args.m is not None and len(speeds) != args.m:
        raise CliError(f"got {len(speeds)} speeds for m={args.m}", EXIT_INVALID)
    if not jobs or any(p <= 0 for p in jobs) or any(v <= 0 for v in speeds):
        raise CliError("jobs and speeds must be positive", EXIT_INVALID)
    bound = lower_bound_sizes(jobs, speeds)
    try:
        exact = exact_makespan_sizes(jobs, speeds, args.budget)
    except OracleBudgetExceeded as exc:
        print(f"exact = unavailable ({exc})")
        _print_value("lower bound", bound)
        return EXIT_BUDGET
    _print_value("exact", exact)
    _print_value("lower bound", bound)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crscheme", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the restricted game")
    _add_param_flags(p, required=False)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="strategy file to write")
    p.add_argument("--witness-out", help="witness file (default: <out>.witness)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="worst-case ratio of a fixed map")
    _add_param_flags(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--strategy")
    g.add_argument("--baseline", help="graham, default or fixed:<i>")
    p.add_argument("--witness-out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="run an algorithm online on an instance")
    _add_param_flags(p)
    p.add_argument("--instance", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--strategy")
    g.add_argument("--baseline", help="graham, default or fixed:<i>")
    p.add_argument("--report")
    p.add_argument("--opt-budget", type=int, default=DEFAULT_OPT_BUDGET)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="play a witness against an algorithm")
    p.add_argument("--witness", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--strategy")
    g.add_argument("--baseline", help="graham, default, fixed:<i> or graham-list")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("oracle", help="exact offline makespan")
    p.add_argument("--jobs", required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--speeds")
    p.add_argument("--budget", type=int, default=DEFAULT_OPT_BUDGET)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ParamsMismatch, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (GameBudgetExceeded, ClassBudgetExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ParamsError, WitnessError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
