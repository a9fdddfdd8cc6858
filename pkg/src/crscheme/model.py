"""Shared value types and exact load arithmetic.

Sizes and speeds are kept as integer exponents of ``base = 1 + eps`` and only
expanded into :class:`fractions.Fraction` values when loads are computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import NamedTuple, Optional, Sequence

DEFAULT_MAX_STATES = 200_000


class ParamsError(ValueError):
    """Invalid scheme parameters or malformed numeric input."""


def to_fraction(value) -> Fraction:
    """Convert ``value`` to an exact rational.

    Accepts ints, Fractions and strings such as ``"1/2"`` or ``"0.01"``.
    Floats are rejected because their binary expansion is rarely what the
    caller meant.
    """
    if isinstance(value, bool):
        raise ParamsError(f"not a rational number: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ParamsError(f"not an exact rational: {value!r}") from None
    raise ParamsError(
        f"expected an exact rational (int, Fraction or str), got {type(value).__name__}"
    )


def _approx_log(x: Fraction) -> float:
    return math.log(x.numerator) - math.log(x.denominator)


def ceil_log(x: Fraction, base: Fraction) -> int:
    """Smallest integer k with ``base**k >= x``."""
    if x <= 0:
        raise ParamsError(f"logarithm of non-positive value {x}")
    k = math.floor(_approx_log(x) / _approx_log(base))
    while base**k < x:
        k += 1
    while base ** (k - 1) >= x:
        k -= 1
    return k


def floor_log(x: Fraction, base: Fraction) -> int:
    """Largest integer k with ``base**k <= x``."""
    if x <= 0:
        raise ParamsError(f"logarithm of non-positive value {x}")
    k = math.floor(_approx_log(x) / _approx_log(base))
    while base**k > x:
        k -= 1
    while base ** (k + 1) <= x:
        k += 1
    return k


@dataclass(frozen=True)
class SchemeParams:
    """Everything the scheme depends on.

    ``speeds`` holds one exponent per machine (speed ``base**e``), sorted
    non-increasing so machine 1 is the fastest; all zeros means identical
    machines. ``origin`` maps each machine back to its position in the raw
    speed list and ``dropped`` lists raw machines that were discarded as too
    slow.
    """

    eps: Fraction
    m: int
    s: int
    cap: int
    speeds: tuple[int, ...] = ()
    max_states: int = DEFAULT_MAX_STATES
    origin: tuple[int, ...] = ()
    dropped: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "eps", to_fraction(self.eps))
        if not self.speeds:
            object.__setattr__(self, "speeds", (0,) * self.m)
        else:
            object.__setattr__(self, "speeds", tuple(int(e) for e in self.speeds))
        if not self.origin:
            object.__setattr__(self, "origin", tuple(range(1, self.m + 1)))
        if not 0 < self.eps <= 1:
            raise ParamsError(f"eps must lie in (0, 1], got {self.eps}")
        if self.m < 1 or self.s < 1 or self.cap < 1 or self.max_states < 1:
            raise ParamsError("m, s, cap and max_states must all be >= 1")
        if len(self.speeds) != self.m or len(self.origin) != self.m:
            raise ParamsError(f"expected {self.m} speed exponents, got {len(self.speeds)}")
        if list(self.speeds) != sorted(self.speeds, reverse=True) or self.speeds[-1] != 0:
            raise ParamsError("speed exponents must be non-increasing with slowest exponent 0")
        if self.base ** self.speeds[0] > Fraction(self.m) / self.eps:
            raise ParamsError("fastest speed exceeds m/eps times the slowest")

    @property
    def base(self) -> Fraction:
        return 1 + self.eps

    @property
    def identical(self) -> bool:
        return self.speeds[0] == 0

    @cached_property
    def speed_values(self) -> tuple[Fraction, ...]:
        return tuple(self.base**e for e in self.speeds)

    @cached_property
    def speed_blocks(self) -> tuple[tuple[int, int], ...]:
        """Half-open index ranges of machines sharing one speed."""
        blocks = []
        start = 0
        for i in range(1, self.m + 1):
            if i == self.m or self.speeds[i] != self.speeds[start]:
                blocks.append((start, i))
                start = i
        return tuple(blocks)

    def size(self, exp: int) -> Fraction:
        return self.base**exp

    def replace(self, **changes) -> "SchemeParams":
        data = {
            "eps": self.eps,
            "m": self.m,
            "s": self.s,
            "cap": self.cap,
            "speeds": self.speeds,
            "max_states": self.max_states,
            "origin": self.origin,
            "dropped": self.dropped,
        }
        data.update(changes)
        if "m" in changes and "speeds" not in changes:
            data["speeds"] = ()
            data["origin"] = ()
        return SchemeParams(**data)


def theoretical_window(eps: Fraction, m: int) -> int:
    """Smallest s >= 1 with (1+eps)**s >= m(1+eps)/eps**5."""
    target = Fraction(m) * (1 + eps) / eps**5
    return max(1, ceil_log(target, 1 + eps))


def theoretical_cap(eps: Fraction, m: int) -> int:
    return math.ceil(Fraction(m) / eps**3)


def make_params(
    eps,
    m: int,
    speeds: Optional[Sequence] = None,
    s: Optional[int] = None,
    cap: Optional[int] = None,
    max_states: Optional[int] = None,
) -> SchemeParams:
    """Build :class:`SchemeParams`, deriving ``s`` and ``cap`` unless given.

    ``speeds`` are raw positive rationals; they are normalized (slow machines
    dropped, the rest rounded down to powers of ``1 + eps``).
    """
    eps = to_fraction(eps)
    if not 0 < eps <= 1:
        raise ParamsError(f"eps must lie in (0, 1], got {eps}")
    if not isinstance(m, int) or m < 1:
        raise ParamsError(f"m must be a positive integer, got {m!r}")
    s = theoretical_window(eps, m) if s is None else s
    cap = theoretical_cap(eps, m) if cap is None else cap
    max_states = DEFAULT_MAX_STATES if max_states is None else max_states
    if speeds is None:
        return SchemeParams(eps=eps, m=m, s=s, cap=cap, max_states=max_states)
    if len(speeds) != m:
        raise ParamsError(f"got {len(speeds)} speeds for m={m} machines")
    from .transforms import normalize_speeds

    norm = normalize_speeds([to_fraction(v) for v in speeds], eps, m)
    return SchemeParams(
        eps=eps,
        m=len(norm.exponents),
        s=s,
        cap=cap,
        speeds=norm.exponents,
        max_states=max_states,
        origin=norm.origin,
        dropped=norm.dropped,
    )


class JobEvent(NamedTuple):
    index: int
    size_exp: int


@dataclass(frozen=True)
class Configuration:
    """Released jobs in arrival order, their machines, and the pending job."""

    jobs: tuple[JobEvent, ...] = ()
    chi: tuple[int, ...] = ()
    pending: Optional[JobEvent] = None

    def __post_init__(self):
        if len(self.jobs) != len(self.chi):
            raise ValueError("every assigned job needs exactly one machine")
        indices = [j.index for j in self.jobs]
        if self.pending is not None:
            indices.append(self.pending.index)
        if any(a >= b for a, b in zip(indices, indices[1:])):
            raise ValueError("arrival order must be strictly increasing")

    @property
    def is_empty(self) -> bool:
        return not self.jobs and self.pending is None

    def release(self, size_exp: int) -> "Configuration":
        if self.pending is not None:
            raise ValueError("previous job is still pending")
        last = self.jobs[-1].index if self.jobs else 0
        return Configuration(self.jobs, self.chi, JobEvent(last + 1, size_exp))

    def place(self, machine: int) -> "Configuration":
        if self.pending is None:
            raise ValueError("no pending job to place")
        return Configuration(self.jobs + (self.pending,), self.chi + (machine,), None)

    def shift(self, t: int) -> "Configuration":
        """Same configuration with every size multiplied by base**t."""
        pend = None if self.pending is None else self.pending._replace(size_exp=self.pending.size_exp + t)
        return Configuration(
            tuple(j._replace(size_exp=j.size_exp + t) for j in self.jobs), self.chi, pend
        )


def loads_of(config: Configuration, params: SchemeParams) -> tuple[Fraction, ...]:
    """Execution-time load per machine (volume divided by speed)."""
    volume = [Fraction(0)] * params.m
    for job, i in zip(config.jobs, config.chi):
        if not 1 <= i <= params.m:
            raise ValueError(f"machine {i} outside 1..{params.m}")
        volume[i - 1] += params.size(job.size_exp)
    return tuple(v / sp for v, sp in zip(volume, params.speed_values))


def makespan_of(config: Configuration, params: SchemeParams) -> Fraction:
    return max(loads_of(config, params), default=Fraction(0))


@dataclass
class RatioReport:
    """Per-iteration makespan, optimum (or lower bound) and their ratio."""

    makespans: list[Fraction] = field(default_factory=list)
    optima: list[Fraction] = field(default_factory=list)
    exact: list[bool] = field(default_factory=list)

    def add(self, makespan: Fraction, opt: Fraction, exact: bool) -> None:
        self.makespans.append(makespan)
        self.optima.append(opt)
        self.exact.append(exact)

    @property
    def ratios(self) -> list[Fraction]:
        return [a / o if o else Fraction(1) for a, o in zip(self.makespans, self.optima)]

    @property
    def max_exact_ratio(self) -> Optional[Fraction]:
        vals = [r for r, ok in zip(self.ratios, self.exact) if ok]
        return max(vals) if vals else None
