"""Continued fractions, the Gauss map and bounded-type symbol words.

Exact values and convergents come from sympy; periodic words reduce to
quadratic surds that mpmath rounds into the working precision.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import chain, cycle, islice
from typing import Any, Iterable, Iterator, Sequence

import mpmath
import sympy as sym

from .errors import CombinatoricsError, DomainError
from .numerics import active_precision

EXHAUSTION_TOLERANCE = 1e-12
DEFAULT_ALPHABET = 20
# decimal digits carried before rounding to the working dtype
ROUNDING_DIGITS = 40

_WORD_PATTERN = re.compile(r"^\s*(?P<pre>[0-9,\s]*?)\s*,?\s*(?:\((?P<period>[0-9,\s]+)\))?\s*$")


@dataclass(frozen=True)
class CFExpansion:
    """Leading continued-fraction entries of a real number.

    ``exact`` is false when the Gauss remainder vanished (below ``1e-12``)
    before the requested depth, i.e. the input was rational to working
    precision and the expansion is truncated.
    """

    entries: tuple[int, ...]
    exact: bool


@dataclass(frozen=True)
class SymbolWord:
    """Word over the alphabet ``{1, ..., alphabet}``."""

    symbols: tuple[int, ...]
    alphabet: int = DEFAULT_ALPHABET

    def __post_init__(self) -> None:
        symbols = tuple(int(symbol) for symbol in self.symbols)
        if not symbols:
            raise CombinatoricsError("symbol words must be nonempty")
        for symbol in symbols:
            if not 1 <= symbol <= self.alphabet:
                raise CombinatoricsError(
                    f"symbol {symbol} is outside the alphabet 1..{self.alphabet}",
                    symbol=symbol,
                    alphabet=self.alphabet,
                )
        object.__setattr__(self, "symbols", symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def rotated(self, steps: int = 1) -> SymbolWord:
        """Cyclic rotation to the left by ``steps`` (negative rotates right)."""

        shift = steps % len(self.symbols)
        return SymbolWord(self.symbols[shift:] + self.symbols[:shift], self.alphabet)

    def periodic(self) -> ContinuedFraction:
        return ContinuedFraction(period=self.symbols)


@dataclass(frozen=True)
class ContinuedFraction:
    """Continued fraction ``[pre..., (period...)]`` of a number in ``(0, 1)``.

    An empty ``period`` denotes a finite (rational) expansion.
    """

    preperiod: tuple[int, ...] = ()
    period: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        preperiod = tuple(int(entry) for entry in self.preperiod)
        period = tuple(int(entry) for entry in self.period)
        if not preperiod and not period:
            raise CombinatoricsError("continued fraction has no entries")
        for entry in preperiod + period:
            if entry < 1:
                raise CombinatoricsError(f"continued-fraction entries must be >= 1, got {entry}", entry=entry)
        object.__setattr__(self, "preperiod", preperiod)
        object.__setattr__(self, "period", period)

    @classmethod
    def parse(cls, text: str) -> ContinuedFraction:
        """Parse ``"1,2"``, ``"(1,2)"`` or ``"2,3,(1)"``."""

        match = _WORD_PATTERN.match(text)
        if match is None:
            raise CombinatoricsError(f"cannot parse continued-fraction word {text!r}", word=text)
        return cls(
            preperiod=_split_entries(match.group("pre") or "", text),
            period=_split_entries(match.group("period") or "", text),
        )

    @property
    def is_rational(self) -> bool:
        return not self.period

    def iter_entries(self) -> Iterator[int]:
        if self.period:
            return chain(self.preperiod, cycle(self.period))
        return iter(self.preperiod)

    def entries(self, count: int) -> tuple[int, ...]:
        return tuple(islice(self.iter_entries(), count))

    def word(self, alphabet: int = DEFAULT_ALPHABET) -> SymbolWord:
        """Periodic part as a symbol word."""

        if not self.period:
            raise CombinatoricsError("a finite continued fraction has no periodic word")
        return SymbolWord(self.period, alphabet)

    def is_bounded(self, bound: int) -> bool:
        return is_bounded_type(self.preperiod + self.period, bound)

    def value(self) -> Any:
        return cf_value(self)

    def __str__(self) -> str:
        parts = [",".join(str(entry) for entry in self.preperiod)] if self.preperiod else []
        if self.period:
            parts.append("(" + ",".join(str(entry) for entry in self.period) + ")")
        return ",".join(parts)


def _split_entries(text: str, original: str) -> tuple[int, ...]:
    pieces = [piece.strip() for piece in text.split(",")]
    try:
        return tuple(int(piece) for piece in pieces if piece)
    except ValueError:
        raise CombinatoricsError(f"cannot parse continued-fraction word {original!r}", word=original) from None


def gauss(x: Any) -> Any:
    """Gauss map: fractional part of ``1/x``."""

    if x == 0:
        raise DomainError("the Gauss map is undefined at 0")
    return (1 / x) % 1


def cf_expand(x: Any, depth: int) -> CFExpansion:
    """First ``depth`` entries of ``x`` in ``(0, 1)``.

    Floats iterate the Gauss map in the working precision. Exact sympy
    numbers (rationals, quadratic surds) are expanded exactly; a rational
    whose expansion ends before ``depth`` is flagged the same way.
    """

    cap = active_precision().cf_depth_cap
    if not 0 < x < 1:
        raise DomainError(f"cf_expand needs x in (0, 1), got {x!r}")
    if not 1 <= depth <= cap:
        raise DomainError(f"depth must be in 1..{cap} at {active_precision().name} precision, got {depth}")

    if isinstance(x, sym.Basic):
        terms = [int(term) for term in islice(sym.continued_fraction_iterator(x), 1, depth + 2)]
        return CFExpansion(entries=tuple(terms[:depth]), exact=len(terms) > depth)

    entries: list[int] = []
    remainder = x
    for _ in range(depth):
        inverse = 1 / remainder
        entry = int(inverse // 1)
        entries.append(entry)
        remainder = inverse - entry
        if remainder < EXHAUSTION_TOLERANCE:
            return CFExpansion(entries=tuple(entries), exact=False)
    return CFExpansion(entries=tuple(entries), exact=True)


def iter_convergents(entries: Iterable[int]) -> Iterator[tuple[int, int]]:
    """Lazy convergents ``p_k / q_k`` of ``[a_1, a_2, ...]`` as exact integer pairs."""

    fractions = sym.continued_fraction_convergents(chain((0,), entries))
    next(fractions)  # 0/1 from the zero integer part
    for fraction in fractions:
        yield int(fraction.p), int(fraction.q)


def convergents(entries: Iterable[int]) -> list[tuple[int, int]]:
    return list(iter_convergents(entries))


def _words(value: ContinuedFraction | Sequence[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    if isinstance(value, ContinuedFraction):
        return value.preperiod, value.period
    entries = tuple(value)
    if not entries:
        raise CombinatoricsError("cf_value needs at least one entry")
    if any(entry < 1 for entry in entries):
        raise CombinatoricsError("continued-fraction entries must be >= 1")
    return entries, ()


def cf_exact(value: ContinuedFraction | Sequence[int]) -> sym.Expr:
    """Exact value: a rational for finite words, a quadratic surd for periodic ones."""

    preperiod, period = _words(value)
    terms: list[Any] = [0, *preperiod]
    if period:
        terms.append(list(period))
    return sym.continued_fraction_reduce(terms)


def to_working(value: sym.Expr) -> Any:
    """Round an exact sympy number to the working precision."""

    profile = active_precision()
    with mpmath.workdps(ROUNDING_DIGITS):
        exact = mpmath.mpf(str(sym.N(value, ROUNDING_DIGITS)))
        high = float(exact)
        if profile.name == "double":
            return high
        low = float(exact - high)
    return profile.dtype(high) + profile.dtype(low)


def quadratic_irrational(word: SymbolWord | Sequence[int]) -> Any:
    """The number in ``(0, 1)`` whose continued fraction is ``word`` repeated forever."""

    symbols = word.symbols if isinstance(word, SymbolWord) else tuple(word)
    if not symbols:
        raise CombinatoricsError("quadratic_irrational needs a nonempty periodic word")
    return to_working(cf_exact(ContinuedFraction(period=symbols)))


def cf_value(value: ContinuedFraction | Sequence[int]) -> Any:
    """Value of a finite or eventually periodic continued fraction."""

    return to_working(cf_exact(value))


def is_bounded_type(entries: Iterable[int], bound: int) -> bool:
    return all(entry <= bound for entry in entries)
