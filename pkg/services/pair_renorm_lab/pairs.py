"""Critical commuting pairs: branch maps, validation, normalization, serialization.

A pair is ``(eta, xi)`` with ``eta`` on ``[0, b]``, ``xi`` on ``[a, 0]``,
``a = eta(0) < 0 < b = xi(0)``. Branches are either translations (the exact
oracle) or cubic sandwiches ``outer(inner(x) ** 3)`` whose inner factor fixes 0.
Cubic branches carry padded domains: ``[-kappa b, (1 + kappa) b]`` for eta
and ``[(1 + kappa) a, -kappa a]`` for xi.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Literal, Mapping, NamedTuple, Sequence, Union

import numpy as np

from .chebapprox import ChebSeries, chebyshev_points, fit
from .errors import CompositionDomainError, DomainError, InvalidPairError
from .numerics import active_precision

LOGGER = logging.getLogger(__name__)

MAX_ORDER = 3


@dataclass(frozen=True)
class PairSettings:
    """Numerical knobs for building and checking pairs."""

    degree: int = 64
    kappa: float = 0.05
    n_max: int = 20
    monotone_probes: int = 64
    residual_probes: int = 129
    residual_limit: float = 1e-8


@dataclass(frozen=True)
class AffineMap:
    """Translation ``x -> x + offset``; exact, entire."""

    offset: Any
    kind: Literal["affine"] = field(default="affine", init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "offset", active_precision().real(self.offset))

    def __call__(self, x: Any) -> Any:
        return x + self.offset

    def contains(self, x: Any) -> np.ndarray:
        return np.ones(np.shape(x), dtype=bool)

    def derivatives(self, x: Any, order: int = MAX_ORDER) -> list[np.ndarray]:
        x = np.asarray(x)
        values = [x + self.offset, np.ones_like(x), np.zeros_like(x), np.zeros_like(x)]
        return values[: order + 1]

    def eval_complex(self, z: complex) -> tuple[complex, float]:
        return complex(z) + complex(self.offset), 0.0

    def conjugated(self, factor: Any) -> AffineMap:
        """Map ``x -> self(factor * x) / factor``."""

        return AffineMap(self.offset / factor)

    @property
    def decay(self) -> float:
        return math.inf

    def to_dict(self) -> dict[str, Any]:
        return {"offset": repr(float(self.offset))}


@dataclass(frozen=True, eq=False)
class CubicMap:
    """Sandwich ``x -> outer(inner(x) ** 3)`` with ``inner(0) = 0``."""

    outer: ChebSeries
    inner: ChebSeries
    kind: Literal["cubic"] = field(default="cubic", init=False)

    def __call__(self, x: Any) -> Any:
        return self.outer(self.inner(x) ** 3)

    @property
    def domain(self) -> tuple[Any, Any]:
        return self.inner.lo, self.inner.hi

    def contains(self, x: Any) -> np.ndarray:
        return self.inner.contains(x)

    @cached_property
    def _inner_derivatives(self) -> list[ChebSeries]:
        return _derivative_chain(self.inner)

    @cached_property
    def _outer_derivatives(self) -> list[ChebSeries]:
        return _derivative_chain(self.outer)

    def derivatives(self, x: Any, order: int = MAX_ORDER) -> list[np.ndarray]:
        """Values and derivatives up to ``order`` (at most 3) by the chain rule."""

        g0 = self.inner(x)
        g1, g2, g3 = (series(x) for series in self._inner_derivatives)
        w0 = g0**3
        w1 = 3 * g0**2 * g1
        w2 = 6 * g0 * g1**2 + 3 * g0**2 * g2
        w3 = 6 * g1**3 + 18 * g0 * g1 * g2 + 3 * g0**2 * g3
        o0 = self.outer(w0)
        o1, o2, o3 = (series(w0) for series in self._outer_derivatives)
        values = [
            o0,
            o1 * w1,
            o2 * w1**2 + o1 * w2,
            o3 * w1**3 + 3 * o2 * w1 * w2 + o1 * w3,
        ]
        return values[: order + 1]

    def eval_complex(self, z: complex) -> tuple[complex, float]:
        g, g_error = self.inner.eval_complex(z)
        w = g**3
        value, o_error = self.outer.eval_complex(w)
        slope, _ = self._outer_derivatives[0].eval_complex(w)
        return value, o_error + abs(slope) * 3 * abs(g) ** 2 * g_error

    def cube_range(self) -> tuple[Any, Any]:
        return cube_range(self.inner)

    def conjugated(self, factor: Any) -> CubicMap:
        """Map ``x -> self(factor * x) / factor``; exact coefficient transforms.

        A negative factor reverses orientation, so the inner factor is
        negated and the outer factor reflected to keep both increasing.
        """

        sign = 1 if factor > 0 else -1
        return CubicMap(
            outer=self.outer.rescaled(sign).scaled(1 / factor),
            inner=self.inner.rescaled(factor).scaled(sign),
        )

    def restricted(self, lo: Any, hi: Any, degree: int) -> CubicMap:
        """Re-expand both factors on the inner interval ``[lo, hi]``."""

        inner = fit(self.inner, lo, hi, degree)
        outer = fit(self.outer, *cube_range(inner), degree)
        return CubicMap(outer=outer, inner=inner)

    @property
    def decay(self) -> float:
        return min(self.inner.decay.rate, self.outer.decay.rate)

    def to_dict(self) -> dict[str, Any]:
        return {"outer": self.outer.to_dict(), "inner": self.inner.to_dict()}


CriticalMap = Union[AffineMap, CubicMap]


def _derivative_chain(series: ChebSeries) -> list[ChebSeries]:
    chain = [series.derivative()]
    while len(chain) < MAX_ORDER:
        chain.append(chain[-1].derivative())
    return chain


def cube_range(inner: ChebSeries) -> tuple[Any, Any]:
    """Range of ``inner ** 3`` over its interval (inner is increasing)."""

    return inner(inner.lo) ** 3, inner(inner.hi) ** 3


@dataclass(frozen=True, eq=False)
class CommutingPair:
    """Pair ``(eta, xi)`` of branches of one kind."""

    eta: CriticalMap
    xi: CriticalMap
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.eta.kind != self.xi.kind:
            raise InvalidPairError(f"branches must share a kind, got {self.eta.kind} and {self.xi.kind}")

    @property
    def kind(self) -> str:
        return self.eta.kind

    @cached_property
    def a(self) -> Any:
        return self.eta(0.0)

    @cached_property
    def b(self) -> Any:
        return self.xi(0.0)

    @property
    def normalized(self) -> bool:
        return abs(self.b - 1) <= 4 * active_precision().eps

    @property
    def heights(self) -> tuple[int, ...]:
        return tuple(self.meta.get("heights", ()))

    @property
    def decay(self) -> float:
        return min(self.eta.decay, self.xi.decay)


class ValidationReport(NamedTuple):
    residual: float
    monotone_ok: bool
    critical_ok: bool
    ordered_ok: bool

    def passed(self, residual_limit: float) -> bool:
        return self.monotone_ok and self.critical_ok and self.ordered_ok and self.residual < residual_limit


class RotationEstimate(NamedTuple):
    value: float
    accuracy: float


def _apply_chain(maps: Sequence[CriticalMap], x: np.ndarray) -> np.ndarray:
    values = np.asarray(x)
    for index, branch in enumerate(maps):
        inside = branch.contains(values)
        if not np.all(inside):
            bad = int(np.argmin(inside))
            raise CompositionDomainError(index, np.asarray(x).reshape(-1)[bad], values.reshape(-1)[bad])
        values = branch(values)
    return values


def commutation_residual(pair: CommutingPair, settings: PairSettings | None = None) -> float:
    """Sup of ``|eta(xi(x)) - xi(eta(x))|`` on the overlap near 0.

    Probes cover ``[a kappa, kappa min(b, |a|)]``, the part of the padded
    overlap where both compositions stay inside the branch domains.
    """

    settings = settings or PairSettings()
    if pair.kind == "affine":
        eta, xi = pair.eta.offset, pair.xi.offset
        return float(abs((eta + xi) - (xi + eta)))

    a, b = pair.a, pair.b
    kappa = settings.kappa
    lo, hi = a * kappa, kappa * min(b, abs(a))
    if not hi > lo:
        raise DomainError("pair has an empty commutation overlap", a=a, b=b)
    probes = np.linspace(lo, hi, settings.residual_probes, dtype=active_precision().dtype)
    forward = _apply_chain([pair.xi, pair.eta], probes)
    backward = _apply_chain([pair.eta, pair.xi], probes)
    return float(np.max(np.abs(forward - backward)))


def validate(pair: CommutingPair, settings: PairSettings | None = None) -> ValidationReport:
    """Measure the pair axioms; failures are reported, never raised."""

    settings = settings or PairSettings()
    ordered_ok = bool(pair.a < 0 < pair.b)
    try:
        residual = commutation_residual(pair, settings)
    except (CompositionDomainError, DomainError) as exc:
        LOGGER.warning("commutation residual unavailable: %s", exc)
        residual = math.inf

    if pair.kind == "affine":
        return ValidationReport(residual, True, True, ordered_ok)

    monotone_ok = all(_increasing(branch, settings.monotone_probes) for branch in (pair.eta, pair.xi))
    critical_ok = all(_cubic_critical_point(branch) for branch in (pair.eta, pair.xi))
    return ValidationReport(residual, monotone_ok, critical_ok, ordered_ok)


def _increasing(branch: CubicMap, probes: int) -> bool:
    for series in (branch.inner, branch.outer):
        points = np.linspace(series.lo, series.hi, probes, dtype=series.coeffs.dtype)
        if not np.all(series.derivative()(points) > 0):
            return False
    return True


def _cubic_critical_point(branch: CubicMap) -> bool:
    inner = branch.inner
    if not inner.lo < 0 < inner.hi:
        return False
    zero = np.zeros((), dtype=inner.coeffs.dtype)
    scale = float(np.max(np.abs(inner.coeffs)))
    tolerance = active_precision().scaled(1e-10) * max(scale, 1.0)
    return bool(abs(inner(zero)) <= tolerance and inner.derivative()(zero) > 0)


def conjugate(pair: CommutingPair, factor: Any) -> CommutingPair:
    """Linear conjugation by ``x -> factor * x`` (positive factor)."""

    if not factor > 0:
        raise InvalidPairError(f"conjugation factor must be positive, got {factor!r}")
    return CommutingPair(pair.eta.conjugated(factor), pair.xi.conjugated(factor), dict(pair.meta))


def normalize(pair: CommutingPair) -> CommutingPair:
    """Conjugate by ``x -> b x`` so that ``xi(0) = 1``."""

    b = pair.b
    if not b > 0:
        raise InvalidPairError(f"cannot normalize a pair with xi(0) = {b!r}", b=b)
    if pair.normalized:
        return pair
    return conjugate(pair, b)


def rescale(pair: CommutingPair, factor: Any) -> CommutingPair:
    """The ``factor``-rescaled pair ``x -> factor * f(x / factor)``."""

    return conjugate(pair, 1 / factor)


def glued_rotation_number(pair: CommutingPair, iterations: int = 10_000) -> RotationEstimate:
    """Rotation number of the circle map glued from ``[a, b]``.

    The lift is ``xi`` on ``[a, 0)`` and ``eta + (b - a)`` on ``[0, b)``. The
    orbit of 0 brackets the rotation number between ``floor(d_j)/j`` and
    ``ceil(d_j)/j`` with ``d_j`` the lifted displacement in circle units;
    the value is the displacement average at the last bracket improvement.
    """

    if iterations < 1000:
        raise DomainError(f"glued_rotation_number needs at least 1000 iterations, got {iterations}")
    a, b = pair.a, pair.b
    if not a < 0 < b:
        raise DomainError("gluing needs a < 0 < b", a=a, b=b)
    length = b - a
    eta_step, xi_step = pair.eta, pair.xi

    turns, x = 0, a - a  # start at the critical point in the working dtype
    lower = (0, 1)
    upper = (1, 1)
    estimate = 0.0
    for j in range(1, iterations + 1):
        if x < 0:
            x = xi_step(x)
        else:
            x = eta_step(x)
            turns += 1
        if x >= b:
            x -= length
            turns += 1
        elif x < a:
            x += length
            turns -= 1
        if not math.isfinite(float(x)):
            raise DomainError(f"glued orbit left the real line at iteration {j}")

        floor_turns = turns - 1 if x < 0 else turns
        ceil_turns = turns if x <= 0 else turns + 1
        improved = False
        if floor_turns * lower[1] > lower[0] * j:
            lower = (floor_turns, j)
            improved = True
        if ceil_turns * upper[1] < upper[0] * j:
            upper = (ceil_turns, j)
            improved = True
        if improved:
            estimate = float((turns + x / length) / j)

    low, high = lower[0] / lower[1], upper[0] / upper[1]
    return RotationEstimate(value=min(max(estimate, low), high), accuracy=high - low)


def pair_to_dict(pair: CommutingPair) -> dict[str, Any]:
    return {
        "kind": pair.kind,
        "eta": pair.eta.to_dict(),
        "xi": pair.xi.to_dict(),
        "normalized": bool(pair.normalized),
        "meta": {
            "heights": [int(h) for h in pair.heights],
            "source": str(pair.meta.get("source", "")),
        },
    }


def _map_from_dict(kind: str, payload: Mapping[str, Any]) -> CriticalMap:
    if kind == "affine":
        return AffineMap(active_precision().dtype(str(payload["offset"])))
    if kind == "cubic":
        return CubicMap(outer=ChebSeries.from_dict(payload["outer"]), inner=ChebSeries.from_dict(payload["inner"]))
    raise InvalidPairError(f"unknown pair kind {kind!r}")


def pair_from_dict(payload: Mapping[str, Any]) -> CommutingPair:
    if not isinstance(payload, Mapping):
        raise InvalidPairError(f"pair document must be a JSON object, got {type(payload).__name__}")
    try:
        kind = payload["kind"]
        meta = payload.get("meta", {})
        return CommutingPair(
            eta=_map_from_dict(kind, payload["eta"]),
            xi=_map_from_dict(kind, payload["xi"]),
            meta={"heights": tuple(meta.get("heights", ())), "source": meta.get("source", "")},
        )
    except KeyError as exc:
        raise InvalidPairError(f"pair document is missing {exc}") from exc


def write_pair(pair: CommutingPair, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(pair_to_dict(pair), indent=2) + "\n", encoding="utf-8")
    return path


def read_pair(path: Path) -> CommutingPair:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidPairError(f"pair file {path} is not valid JSON: {exc}") from exc
    return pair_from_dict(payload)


def grid(lo: Any, hi: Any, count: int) -> np.ndarray:
    """Chebyshev-spaced sample points used by pair metrics."""

    if count < 33:
        raise DomainError(f"pair grids need at least 33 points, got {count}")
    return chebyshev_points(lo, hi, count)
