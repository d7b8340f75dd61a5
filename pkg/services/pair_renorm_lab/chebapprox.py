"""Interval-scaled Chebyshev series.

A :class:`ChebSeries` stores Chebyshev coefficients of a function on
``[lo, hi]`` after the affine pullback to ``[-1, 1]``. Series are immutable;
every operation returns a new series. Fitting interpolates at Chebyshev points
of the second kind (endpoints included) and the coefficients come from the
discrete cosine sum evaluated in the working dtype.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from numpy.polynomial import chebyshev as cheb

from .errors import (
    AnalyticDomainError,
    CompositionDomainError,
    DomainError,
    ExtrapolationError,
    FitError,
)
from .numerics import active_precision

LOGGER = logging.getLogger(__name__)

EXTRAPOLATION_MARGIN = 0.05
TAIL_TOLERANCE = 1e-11
NOISE_FLOOR = 1e-14
MIN_DECAY_DEGREE = 8
# a last significant coefficient this far above the floor means the series ended abruptly
_POLYNOMIAL_DROP = 1e4

Link = Callable[[np.ndarray], Any]


@dataclass(frozen=True)
class DecayEstimate:
    """Geometric decay rate of Chebyshev coefficients.

    ``sentinel`` marks series whose coefficients carry no usable decay
    information (polynomials, all-noise series); their rate is ``inf``.
    """

    rate: float
    sentinel: bool = False

    def __float__(self) -> float:
        return float(self.rate)


@dataclass(frozen=True, eq=False)
class ChebSeries:
    """Chebyshev expansion of a real function on ``[lo, hi]``."""

    lo: Any
    hi: Any
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        profile = active_precision()
        lo = profile.real(self.lo)
        hi = profile.real(self.hi)
        if not hi > lo:
            raise DomainError(f"interval requires hi > lo, got [{lo!r}, {hi!r}]", lo=lo, hi=hi)
        coeffs = np.array(self.coeffs, dtype=profile.dtype, copy=True).reshape(-1)
        if coeffs.size == 0:
            raise DomainError("a Chebyshev series needs at least one coefficient")
        coeffs.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def tail(self) -> float:
        """Largest of the last two coefficient magnitudes (constant term excluded)."""

        if self.degree == 0:
            return 0.0
        return float(np.max(np.abs(self.coeffs[max(1, self.degree - 1) :])))

    @property
    def resolved(self) -> bool:
        scale = float(np.max(np.abs(self.coeffs)))
        return self.tail <= active_precision().scaled(TAIL_TOLERANCE) * scale

    @cached_property
    def decay(self) -> DecayEstimate:
        if self.degree < MIN_DECAY_DEGREE:
            return DecayEstimate(rate=math.inf, sentinel=True)
        return decay_rate(self)

    def contains(self, x: Any) -> np.ndarray:
        """Which points lie inside the interval widened by the extrapolation margin."""

        margin = EXTRAPOLATION_MARGIN * (self.hi - self.lo)
        values = np.asarray(x)
        return (values >= self.lo - margin) & (values <= self.hi + margin)

    def _pullback(self, x: Any) -> Any:
        return (2 * x - (self.lo + self.hi)) / (self.hi - self.lo)

    def eval(self, x: Any) -> Any:
        """Evaluate on real points, refusing anything beyond the padding."""

        inside = self.contains(x)
        if not np.all(inside):
            offending = np.asarray(x)[~inside].reshape(-1)[0]
            raise ExtrapolationError(offending, self.lo, self.hi)
        return cheb.chebval(self._pullback(np.asarray(x, dtype=self.coeffs.dtype)), self.coeffs)

    __call__ = eval

    def eval_complex(self, z: complex) -> tuple[complex, float]:
        """Analytic continuation at ``z`` with an error estimate.

        ``z`` must sit inside the Bernstein ellipse certified by the
        coefficient decay; points of the real interval are always accepted.
        """

        ctype = np.result_type(self.coeffs.dtype, np.complex64)
        t = self._pullback(np.asarray(z, dtype=ctype))
        root = np.sqrt(t * t - 1)
        parameter = float(max(abs(t + root), abs(t - root)))
        estimate = self.decay
        if parameter > 1 + 1e-12 and not estimate.sentinel and parameter >= estimate.rate:
            raise AnalyticDomainError(complex(z), parameter, estimate.rate)

        magnitudes = np.abs(self.coeffs)
        floor = active_precision().scaled(NOISE_FLOOR) * float(magnitudes.max())
        significant = magnitudes > floor
        # noise under the floor would be amplified by parameter**k
        value = cheb.chebval(t, np.where(significant, self.coeffs, 0))
        powers = parameter ** np.arange(self.coeffs.size)
        error = active_precision().eps * float(np.sum(np.where(significant, magnitudes, 0) * powers))
        if not estimate.sentinel:
            ratio = parameter / estimate.rate
            last = int(np.flatnonzero(significant)[-1])
            if last < self.degree:
                # dropped coefficients sit below the floor and keep decaying at the fitted rate
                error += floor * parameter ** (last + 1) * (1 / (1 - ratio) if ratio < 1 else self.degree - last)
            error += self.tail * (ratio**self.degree / (1 - ratio) if ratio < 1 else 1.0)
        return complex(value), error

    def derivative(self) -> ChebSeries:
        return ChebSeries(self.lo, self.hi, cheb.chebder(self.coeffs) * (2 / (self.hi - self.lo)))

    def rescaled(self, factor: Any) -> ChebSeries:
        """Series for ``x -> self(factor * x)``; exact, only the interval moves."""

        if factor > 0:
            return ChebSeries(self.lo / factor, self.hi / factor, self.coeffs)
        if factor < 0:
            signs = (-1.0) ** np.arange(self.coeffs.size)
            return ChebSeries(self.hi / factor, self.lo / factor, self.coeffs * signs)
        raise DomainError("rescaling factor must be nonzero")

    def scaled(self, factor: Any) -> ChebSeries:
        """Series for ``x -> factor * self(x)``."""

        return ChebSeries(self.lo, self.hi, self.coeffs * factor)

    def to_dict(self) -> dict[str, Any]:
        return {
            "lo": _decimal(self.lo),
            "hi": _decimal(self.hi),
            "coeffs": [_decimal(value) for value in self.coeffs],
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> ChebSeries:
        dtype = active_precision().dtype
        try:
            return cls(
                dtype(str(payload["lo"])),
                dtype(str(payload["hi"])),
                np.array([dtype(str(value)) for value in payload["coeffs"]], dtype=dtype),
            )
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed series document: {exc}") from exc


def _decimal(value: Any) -> str:
    if isinstance(value, np.longdouble) and np.finfo(np.longdouble).eps < np.finfo(np.float64).eps:
        return np.format_float_scientific(value, unique=True)
    return repr(float(value))


def chebyshev_points(lo: Any, hi: Any, count: int) -> np.ndarray:
    """Chebyshev points of the second kind on ``[lo, hi]``, ascending, endpoints exact."""

    if count < 2:
        raise DomainError("at least two Chebyshev points are required")
    profile = active_precision()
    dtype = profile.dtype
    lo, hi = profile.real(lo), profile.real(hi)
    n = count - 1
    pi = np.arccos(dtype(-1))
    t = -np.cos(pi * np.arange(count, dtype=dtype) / n)
    t = (t - t[::-1]) / 2
    nodes = (lo + hi) / 2 + (hi - lo) / 2 * t
    nodes[0], nodes[-1] = lo, hi
    return nodes


def _coefficients(values: np.ndarray) -> np.ndarray:
    n = values.size - 1
    if n == 0:
        return values.copy()
    dtype = values.dtype.type
    pi = np.arccos(dtype(-1))
    t = -np.cos(pi * np.arange(n + 1, dtype=dtype) / n)
    t = (t - t[::-1]) / 2
    weights = np.ones(n + 1, dtype=dtype)
    weights[0] = weights[-1] = 0.5
    coeffs = (2 / dtype(n)) * ((weights * values) @ cheb.chebvander(t, n))
    coeffs[0] /= 2
    coeffs[-1] /= 2
    return coeffs


def _sample(f: Callable[..., Any], nodes: np.ndarray, vectorized: bool) -> np.ndarray:
    dtype = nodes.dtype
    if vectorized:
        values = np.asarray(f(nodes), dtype=dtype)
        if values.shape != nodes.shape:
            values = np.broadcast_to(values, nodes.shape).astype(dtype)
    else:
        values = np.array([f(node) for node in nodes], dtype=dtype)
    bad = ~np.isfinite(values)
    if bad.any():
        index = int(np.argmax(bad))
        node, value = nodes[index], values[index]
        raise FitError(f"non-finite sample {value!r} at node {node!r}", node=node, value=value)
    return values


def fit(f: Callable[..., Any], lo: Any, hi: Any, degree: int, *, vectorized: bool = True) -> ChebSeries:
    """Interpolate ``f`` at ``degree + 1`` Chebyshev points of ``[lo, hi]``.

    Parameters
    ----------
    f:
        Function to sample. With ``vectorized`` it receives the whole node
        array, otherwise one node at a time.
    lo, hi:
        Interval ends, ``hi > lo``.
    degree:
        Polynomial degree of the interpolant, at least 1.
    """

    if degree < 1:
        raise DomainError(f"degree must be at least 1, got {degree}")
    if not hi > lo:
        raise DomainError(f"interval requires hi > lo, got [{lo!r}, {hi!r}]", lo=lo, hi=hi)
    nodes = chebyshev_points(lo, hi, degree + 1)
    series = ChebSeries(lo, hi, _coefficients(_sample(f, nodes, vectorized)))
    if not series.resolved:
        LOGGER.debug("fit on [%r, %r] unresolved at degree %d (tail %.3e)", lo, hi, degree, series.tail)
    return series


def compose_refit(chain: Sequence[Link], lo: Any, hi: Any, degree: int) -> ChebSeries:
    """Fit the composition of ``chain`` (applied left to right) on ``[lo, hi]``.

    Links receive numpy arrays. Links exposing ``contains`` are checked before
    they are applied, so a node pushed outside a link's domain is reported
    with the link index instead of being extrapolated.
    """

    if degree < 1:
        raise DomainError(f"degree must be at least 1, got {degree}")
    nodes = chebyshev_points(lo, hi, degree + 1)
    values = nodes.copy()
    for index, link in enumerate(chain):
        contains = getattr(link, "contains", None)
        if contains is not None:
            inside = np.asarray(contains(values), dtype=bool)
            if not inside.all():
                bad = int(np.argmin(inside))
                raise CompositionDomainError(index, nodes[bad], values[bad])
        try:
            values = np.asarray(link(values), dtype=nodes.dtype)
        except ExtrapolationError as exc:
            matches = np.flatnonzero(values == exc.x)
            node = nodes[matches[0]] if matches.size else math.nan
            raise CompositionDomainError(index, node, exc.x) from exc
        finite = np.isfinite(values)
        if not finite.all():
            bad = int(np.argmin(finite))
            raise CompositionDomainError(index, nodes[bad], values[bad])
    series = ChebSeries(lo, hi, _coefficients(values))
    if not series.resolved:
        LOGGER.debug("composition of %d links unresolved at degree %d (tail %.3e)", len(chain), degree, series.tail)
    return series


def decay_rate(series: ChebSeries) -> DecayEstimate:
    """Least-squares geometric decay rate of the coefficients.

    Coefficients below ``1e-14 * max|c_k|`` (rescaled to the working
    precision) are noise. The fit runs over the significant coefficients of
    index 1 and above; a rate of 1 means no analytic margin is certified.
    """

    if series.degree < MIN_DECAY_DEGREE:
        raise DomainError(f"decay_rate needs degree >= {MIN_DECAY_DEGREE}, got {series.degree}")
    magnitudes = np.abs(series.coeffs).astype(np.float64)
    peak = float(magnitudes.max())
    if peak == 0.0:
        return DecayEstimate(rate=math.inf, sentinel=True)
    floor = active_precision().scaled(NOISE_FLOOR) * peak
    index = np.arange(magnitudes.size)
    significant = index[(magnitudes > floor) & (index >= 1)]
    if significant.size < 3:
        return DecayEstimate(rate=math.inf, sentinel=True)
    last = int(significant[-1])
    if last < series.degree and magnitudes[last] > _POLYNOMIAL_DROP * floor:
        return DecayEstimate(rate=math.inf, sentinel=True)
    slope = np.polyfit(significant.astype(np.float64), np.log(magnitudes[significant]), 1)[0]
    return DecayEstimate(rate=max(math.exp(-slope), 1.0))
