"""Text formats for canonical keys, strategies, witnesses, instances and reports."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .canonical import CanonicalKey
from .game import SOLVER_VERSION, AdversaryWitness, AlgorithmMap, GameResult
from .model import SchemeParams, to_fraction
from .online import ExecutionTrace

FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


class InstanceError(ValueError):
    """Unparseable or invalid instance file; carries the offending line."""


class ParamsMismatch(ValueError):
    def __init__(self, name: str, expected, got):
        super().__init__(f"parameter {name!r} mismatch: file has {expected}, flags give {got}")
        self.field = name


# ---------------------------------------------------------------- keys


def _pairs_text(pairs) -> str:
    return ",".join(f"{o}:{c}" for o, c in pairs)


def encode_key(key: CanonicalKey) -> str:
    parts = ["P" + ("N" if key.pending is None else str(key.pending))]
    parts += [f"M{i}:{_pairs_text(p)}" for i, p in enumerate(key.machines, start=1)]
    parts.append("R:" + _pairs_text(key.released))
    return "|".join(parts)


def _parse_pairs(text: str):
    if not text:
        return ()
    out = []
    for item in text.split(","):
        o, c = item.split(":")
        out.append((int(o), int(c)))
    return tuple(out)


def decode_key(text: str) -> CanonicalKey:
    try:
        parts = text.split("|")
        head, machines, tail = parts[0], parts[1:-1], parts[-1]
        if not head.startswith("P") or not tail.startswith("R:"):
            raise ValueError
        pending = None if head == "PN" else int(head[1:])
        ms = []
        for i, part in enumerate(machines, start=1):
            prefix = f"M{i}:"
            if not part.startswith(prefix):
                raise ValueError
            ms.append(_parse_pairs(part[len(prefix):]))
        return CanonicalKey(pending, tuple(ms), _parse_pairs(tail[2:]))
    except ValueError:
        raise FormatError(f"malformed key encoding {text!r}") from None


# ---------------------------------------------------------------- headers


def _ratio_text(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def describe(x: Fraction, digits: int = 6) -> str:
    """Exact rational followed by its decimal expansion."""
    return f"{x} (~{float(x):.{digits}f})"


def _params_header(params: SchemeParams) -> list[str]:
    return [
        f"format={FORMAT_VERSION}",
        f"m={params.m}",
        f"eps={_ratio_text(params.eps)}",
        f"s={params.s}",
        f"cap={params.cap}",
        "speeds=" + ",".join(str(e) for e in params.speeds),
        f"solver={SOLVER_VERSION}",
    ]


def _render(kind: str, header: list[str], body: list[str]) -> str:
    body_text = "".join(line + "\n" for line in body)
    digest = hashlib.sha256(body_text.encode()).hexdigest()
    return f"# crscheme {kind}\n" + "".join(h + "\n" for h in header) + "--\n" + body_text + f"--\nsha256={digest}\n"


def _split(text: str, kind: str) -> tuple[dict[str, str], list[str]]:
    lines = text.split("\n")
    if not lines or lines[0] != f"# crscheme {kind}":
        raise FormatError(f"not a {kind} file")
    try:
        first = lines.index("--")
        second = lines.index("--", first + 1)
    except ValueError:
        raise FormatError(f"{kind} file lacks body markers") from None
    header = {}
    for line in lines[1:first]:
        name, _, value = line.partition("=")
        header[name] = value
    body = lines[first + 1:second]
    footer = lines[second + 1]
    digest = hashlib.sha256("".join(b + "\n" for b in body).encode()).hexdigest()
    if footer != f"sha256={digest}":
        raise FormatError(f"{kind} file checksum mismatch")
    if header.get("format") != str(FORMAT_VERSION):
        raise FormatError(f"unsupported {kind} format version {header.get('format')!r}")
    return header, body


def _params_from_header(h: dict[str, str]) -> SchemeParams:
    try:
        speeds = tuple(int(e) for e in h["speeds"].split(",")) if h["speeds"] else ()
        return SchemeParams(eps=to_fraction(h["eps"]), m=int(h["m"]), s=int(h["s"]), cap=int(h["cap"]), speeds=speeds)
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad header: {exc}") from None


def check_params(file_params: SchemeParams, given: SchemeParams) -> None:
    """Raise :class:`ParamsMismatch` naming the first differing field."""
    for name in ("m", "eps", "s", "cap", "speed_values"):
        a, b = getattr(file_params, name), getattr(given, name)
        if name == "speed_values":
            name, a, b = "speeds", list(file_params.speeds), list(given.speeds)
            if file_params.speed_values == given.speed_values:
                continue
        if a != b:
            raise ParamsMismatch(name, a, b)


# ---------------------------------------------------------------- strategies


@dataclass
class StrategyFile:
    params: SchemeParams
    value: Fraction
    map: AlgorithmMap


def dump_strategy(result: GameResult) -> str:
    rows = sorted((encode_key(k), v) for k, v in result.map.table.items())
    header = _params_header(result.params) + [f"value={_ratio_text(result.value)}", f"keys={len(rows)}"]
    return _render("strategy", header, [f"{k}\t{v}" for k, v in rows])


def load_strategy(text: str) -> StrategyFile:
    h, body = _split(text, "strategy")
    params = _params_from_header(h)
    table = {}
    for line in body:
        k, _, v = line.partition("\t")
        machine = int(v)
        if not 1 <= machine <= params.m:
            raise FormatError(f"machine {machine} outside 1..{params.m}")
        table[decode_key(k)] = machine
    if int(h.get("keys", -1)) != len(table):
        raise FormatError("strategy key count does not match header")
    amap = AlgorithmMap(params, table, {"solver": h.get("solver", "")})
    return StrategyFile(params, to_fraction(h["value"]), amap)


def strategy_as_result(sf: StrategyFile) -> GameResult:
    """Wrap a parsed strategy so it can be dumped again (witness left empty)."""
    return GameResult(sf.value, sf.map, AdversaryWitness(sf.params, sf.value), len(sf.map.table), sf.params)


# ---------------------------------------------------------------- witnesses


def dump_witness(witness: AdversaryWitness) -> str:
    rows = sorted((encode_key(k), "STOP" if d is None else str(d)) for k, d in witness.moves.items())
    header = _params_header(witness.params) + [f"value={_ratio_text(witness.value)}", f"keys={len(rows)}"]
    return _render("witness", header, [f"{k}\t{d}" for k, d in rows])


def load_witness(text: str) -> AdversaryWitness:
    h, body = _split(text, "witness")
    params = _params_from_header(h)
    moves: dict[CanonicalKey, Optional[int]] = {}
    for line in body:
        k, _, d = line.partition("\t")
        try:
            moves[decode_key(k)] = None if d == "STOP" else int(d)
        except ValueError:
            raise FormatError(f"bad witness move {d!r}") from None
    if int(h.get("keys", -1)) != len(moves):
        raise FormatError("witness key count does not match header")
    return AdversaryWitness(params, to_fraction(h["value"]), moves)


# ---------------------------------------------------------------- instances


@dataclass
class InstanceFile:
    sizes: list[Fraction]
    m: Optional[int] = None
    speeds: Optional[list[Fraction]] = None


def parse_instance(text: str) -> InstanceFile:
    inst = InstanceFile([])
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("m="):
                inst.m = int(line[2:])
                continue
            if line.startswith("speeds="):
                inst.speeds = [to_fraction(v) for v in line[7:].split(",")]
                continue
            p = to_fraction(line)
        except ValueError:
            raise InstanceError(f"line {lineno}: cannot parse {raw.strip()!r}") from None
        if p <= 0:
            raise InstanceError(f"line {lineno}: job size must be positive, got {line}")
        inst.sizes.append(p)
    return inst


def read_instance(path) -> InstanceFile:
    return parse_instance(Path(path).read_text())


def format_trace(trace: ExecutionTrace) -> str:
    rows = ["iter\tsize\texp\tstage\tmachine\tA_j\topt\tratio\tgame_ratio"]
    for st in trace.steps:
        opt = str(st.opt) if st.exact else f">={st.opt}"
        ratio = str(st.ratio) if st.exact else f"<={st.ratio}"
        game = "-" if st.game_ratio is None else str(st.game_ratio)
        rows.append(f"{st.index}\t{st.size}\t{st.size_exp}\t{st.stage}\t{st.machine}\t{st.makespan}\t{opt}\t{ratio}\t{game}")
    best = trace.report.max_exact_ratio
    if best is None:
        rows.append("max exact-OPT prefix ratio: none")
    else:
        rows.append(f"max exact-OPT prefix ratio: {describe(best)}")
    return "\n".join(rows) + "\n"
