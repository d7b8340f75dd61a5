"""Critical circle lifts, rotation numbers, parameter tuning and pair extraction.

Orbits of 0 are followed as ``(integer part, fractional part)`` so that the
comparisons deciding rotation-number brackets are exact integer tests.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Any, Iterator, Literal, Union

import numpy as np

from .chebapprox import fit
from .combinatorics import ContinuedFraction, SymbolWord, iter_convergents
from .errors import (
    CombinatoricsError,
    DomainError,
    RationalTargetError,
    RepresentationError,
    ToleranceNotReached,
    TuningError,
)
from .numerics import active_precision
from .pairs import AffineMap, CommutingPair, CubicMap, PairSettings, cube_range, normalize

LOGGER = logging.getLogger(__name__)

ORBIT_BUDGET = 10_000_000
MIN_ROTATION_TOL = 1e-12
MIN_TUNING_TOL = 1e-11
MAX_BISECTIONS = 60
SERIES_SWITCH = 1e-2
SERIES_TERMS = 7
C_BOUND = 0.9

Verdict = Literal["low", "high", "within"]


def _pi(dtype: type) -> Any:
    return np.pi if dtype is np.float64 else np.arccos(dtype(-1))


@dataclass(frozen=True)
class CircleLift:
    """Two-parameter critical family.

    ``F(x) = x + omega + [(c - 1) sin(2 pi x) / (2 pi) - (c / 2) sin(4 pi x) / (4 pi)] / (1 - c / 2)``
    with ``F'(x) = (1 - cos 2 pi x)(1 + c cos 2 pi x) / (1 - c / 2)``; ``c = 0`` is
    the classical sine family. The critical point at 0 is cubic.
    """

    omega: Any
    c: float = 0.0
    _two_pi: Any = field(init=False, repr=False)
    _sin1: Any = field(init=False, repr=False)
    _sin2: Any = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not -C_BOUND < self.c < C_BOUND:
            raise DomainError(f"family parameter c must lie in (-{C_BOUND}, {C_BOUND}), got {self.c!r}")
        if not 0 <= self.omega <= 1:
            raise DomainError(f"omega must lie in [0, 1], got {self.omega!r}")
        profile = active_precision()
        two_pi = 2 * _pi(profile.dtype)
        denominator = 1 - profile.real(self.c) / 2
        object.__setattr__(self, "omega", profile.real(self.omega))
        object.__setattr__(self, "_two_pi", two_pi)
        object.__setattr__(self, "_sin1", (self.c - 1) / (two_pi * denominator))
        object.__setattr__(self, "_sin2", (self.c / 2) / (2 * two_pi * denominator))

    def periodic_part(self, x: Any) -> Any:
        return self._sin1 * np.sin(self._two_pi * x) - self._sin2 * np.sin(2 * self._two_pi * x)

    def __call__(self, x: Any) -> Any:
        return x + self.omega + self.periodic_part(x)

    def derivative(self, x: Any) -> Any:
        cosine = np.cos(self._two_pi * x)
        return (1 - cosine) * (1 + self.c * cosine) / (1 - self.c / 2)

    def step(self, f: Any) -> Any:
        if type(f) is float:
            angle = 2 * math.pi * f
            sine = math.sin(angle)
            return f + self.omega + sine * (self._sin1 - 2 * self._sin2 * math.cos(angle))
        return self(f)

    @property
    def series_coefficients(self) -> list[float]:
        """Coefficients of ``u(x) = sum_k s_k x^(2k-2)``, ``k = 1..7``."""

        pi = math.pi
        scale = 1 - self.c / 2
        out = []
        for k in range(1, SERIES_TERMS + 1):
            sign = (-1) ** k
            term = (self.c - 1) * sign * (2 * pi) ** (2 * k) - (self.c / 2) * sign * (4 * pi) ** (2 * k)
            out.append(term / (math.factorial(2 * k + 1) * scale))
        return out

    def critical_factor(self, x: Any) -> np.ndarray:
        """``u(x) = (F(x) - omega) / x**3``, positive, even and analytic through 0."""

        x = np.asarray(x, dtype=active_precision().dtype)
        out = np.empty_like(x)
        small = np.abs(x) < SERIES_SWITCH
        if small.any():
            squares = x[small] ** 2
            total = np.zeros_like(squares)
            for coefficient in reversed(self.series_coefficients):
                total = total * squares + coefficient
            out[small] = total
        large = ~small
        if large.any():
            xl = x[large]
            out[large] = (xl + self.periodic_part(xl)) / xl**3
        return out

    def inner_factor(self, x: Any) -> np.ndarray:
        """``x u(x)^(1/3)``: the increasing map whose cube is ``F - omega``."""

        x = np.asarray(x, dtype=active_precision().dtype)
        u = self.critical_factor(x)
        bad = ~(u > 0)
        if bad.any():
            index = int(np.argmax(bad))
            raise RepresentationError(
                f"critical factor is not positive at x={x.reshape(-1)[index]!r}",
                node=x.reshape(-1)[index],
                value=u.reshape(-1)[index],
            )
        return x * np.cbrt(u)

    def with_omega(self, omega: Any) -> CircleLift:
        return replace(self, omega=omega)


@dataclass(frozen=True)
class RigidRotation:
    """Exact rotation ``x -> x + theta``; the affine oracle path."""

    theta: Any

    def __post_init__(self) -> None:
        if not 0 < self.theta < 1:
            raise DomainError(f"rotation angle must lie in (0, 1), got {self.theta!r}")
        object.__setattr__(self, "theta", active_precision().real(self.theta))

    @property
    def omega(self) -> Any:
        return self.theta

    def __call__(self, x: Any) -> Any:
        return x + self.theta

    def derivative(self, x: Any) -> Any:
        return np.ones_like(np.asarray(x, dtype=float))

    def step(self, f: Any) -> Any:
        return f + self.theta


AnyLift = Union[CircleLift, RigidRotation]


def lift_eval(lift: AnyLift, x: Any) -> Any:
    return lift(x)


def lift_deriv(lift: AnyLift, x: Any) -> Any:
    return lift.derivative(x)


def iterate_orbit(lift: AnyLift, budget: int = ORBIT_BUDGET) -> Iterator[tuple[int, int, Any]]:
    """Yield ``(j, n_j, f_j)`` with ``F^j(0) = n_j + f_j`` and ``0 <= f_j < 1``."""

    n = 0
    f = active_precision().real(0)
    for j in range(1, budget + 1):
        y = lift.step(f)
        whole = int(y // 1)
        n += whole
        f = y - whole
        yield j, n, f


def rotation_number(lift: AnyLift, tol: float, *, budget: int = ORBIT_BUDGET) -> Any:
    """Rotation number of ``lift`` from the orbit of 0.

    Every iterate brackets the rotation number:
    ``floor(F^j(0))/j <= rho <= ceil(F^j(0))/j``. At each bracket improvement
    the average ``F^j(0)/j`` is recorded; the loop stops once the bracket is
    narrower than ``tol``, or two successive averages agree to ``tol`` while
    the bracket is below ``sqrt(tol)``. A return ``F^q(0) = p`` is exact.
    """

    floor_tol = active_precision().scaled(MIN_ROTATION_TOL)
    if not tol >= floor_tol:
        raise DomainError(f"rotation-number tolerance must be at least {floor_tol:.1e}, got {tol!r}")

    lower = (0, 1)
    upper = (1, 1)
    previous = None
    estimate: Any = 0.5
    for j, n, f in iterate_orbit(lift, budget):
        if f == 0:
            return active_precision().real(n) / j
        improved = False
        if n * lower[1] > lower[0] * j:
            lower = (n, j)
            improved = True
        if (n + 1) * upper[1] < upper[0] * j:
            upper = (n + 1, j)
            improved = True
        if not improved:
            continue
        estimate = (n + f) / j
        width = upper[0] / upper[1] - lower[0] / lower[1]
        if width < tol:
            return _clip(estimate, lower, upper)
        if previous is not None and abs(estimate - previous) < tol and width < math.sqrt(tol):
            return _clip(estimate, lower, upper)
        previous = estimate

    width = upper[0] / upper[1] - lower[0] / lower[1]
    raise ToleranceNotReached(
        f"rotation number not resolved to {tol:.1e} within {budget} iterations",
        best_estimate=_clip(estimate, lower, upper),
        accuracy=width,
    )


def _clip(value: Any, lower: tuple[int, int], upper: tuple[int, int]) -> Any:
    real = active_precision().real
    low = real(lower[0]) / lower[1]
    high = real(upper[0]) / upper[1]
    return min(max(value, low), high)


@dataclass(frozen=True)
class TuningResult:
    omega: Any
    c: float
    steps: int
    target: ContinuedFraction

    def __float__(self) -> float:
        return float(self.omega)


def _as_target(target: Any) -> ContinuedFraction:
    if isinstance(target, SymbolWord):
        target = target.periodic()
    if isinstance(target, str):
        target = ContinuedFraction.parse(target)
    if not isinstance(target, ContinuedFraction):
        raise RationalTargetError(
            f"tuning targets must be continued-fraction words, got {type(target).__name__} {target!r}"
        )
    if target.is_rational:
        raise RationalTargetError(f"target {target} is rational; rational rotation numbers lock on plateaus")
    return target


def classify(lift: AnyLift, target: ContinuedFraction, tol: float, *, budget: int = ORBIT_BUDGET) -> Verdict:
    """Compare ``rho(lift)`` with the irrational ``target``.

    Walks the convergents ``p_k/q_k`` of the target, which alternate around
    it starting with ``0/1`` below. ``F^q(0) >= p`` proves ``rho >= p/q`` and
    ``F^q(0) <= p`` proves ``rho <= p/q``; a proof on the far side of a
    convergent decides the comparison. Two undecided neighbours confine
    ``rho`` to an interval of width ``1/(q_{k-1} q_k)`` around the target.
    """

    orbit = iterate_orbit(lift, budget)
    j, n, f = 0, 0, active_precision().real(0)
    previous_q = None
    for index, (p, q) in enumerate(_convergents_from_zero(target)):
        while j < q:
            try:
                j, n, f = next(orbit)
            except StopIteration:
                raise ToleranceNotReached(
                    f"could not place rotation number against {target} within {budget} iterations",
                    best_estimate=(n + f) / max(j, 1),
                    accuracy=1 / (previous_q or 1),
                ) from None
        below = index % 2 == 0
        at_least = n >= p
        at_most = n < p or (n == p and f == 0)
        if below and at_most:
            return "low"
        if not below and at_least:
            return "high"
        if previous_q is not None and previous_q * q * tol > 4:
            return "within"
        previous_q = q
    raise AssertionError("unreachable: periodic targets have infinitely many convergents")


def _convergents_from_zero(target: ContinuedFraction) -> Iterator[tuple[int, int]]:
    yield 0, 1
    yield from iter_convergents(target.iter_entries())


def tune_omega(c: float, target: Any, tol: float, *, max_steps: int = MAX_BISECTIONS) -> TuningResult:
    """Bisect ``omega`` in ``[0, 1]`` until ``|rho(F_omega) - target| < tol``."""

    target = _as_target(target)
    floor_tol = active_precision().scaled(MIN_TUNING_TOL)
    if not tol >= floor_tol:
        raise DomainError(f"tuning tolerance must be at least {floor_tol:.1e}, got {tol!r}")

    real = active_precision().real
    lo, hi = real(0), real(1)
    if classify(CircleLift(lo, c), target, tol) != "low" or classify(CircleLift(hi, c), target, tol) != "high":
        raise TuningError(f"rotation numbers at omega=0 and omega=1 do not bracket {target}")

    for step in range(1, max_steps + 1):
        mid = (lo + hi) / 2
        if not lo < mid < hi:
            raise TuningError(f"omega bracket [{lo!r}, {hi!r}] collapsed before reaching tolerance {tol:.1e}")
        verdict = classify(CircleLift(mid, c), target, tol)
        if verdict == "within":
            LOGGER.info("tuned c=%s to %s: omega=%r after %d bisections", c, target, mid, step)
            return TuningResult(omega=mid, c=c, steps=step, target=target)
        if verdict == "low":
            lo = mid
        else:
            hi = mid
    raise TuningError(f"no omega within {tol:.1e} of {target} after {max_steps} bisections")


def first_return(lift: AnyLift, n_max: int) -> tuple[int, int, Any]:
    """``(m, p, f_m)`` of the first return of the critical value to ``[0, F(0))``.

    ``m = min{k >= 1 : frac(F^(k+1)(0)) < frac(F(0))}`` and ``p = floor(F^m(0)) + 1``;
    the pair offset is ``F^m(0) - p = f_m - 1``.
    """

    limit = n_max + 1
    orbit = iterate_orbit(lift, limit + 2)
    _, _, f1 = next(orbit)
    if not 0 < f1 < 1 or lift.omega >= 1:
        raise DomainError(f"critical value F(0)={lift.omega!r} must lie in (0, 1)")
    n_prev, f_prev = 0, f1
    for j, n, f in orbit:
        m = j - 1
        if m > limit:
            break
        if f < f1:
            return m, n_prev + 1, f_prev
        n_prev, f_prev = n, f
    raise CombinatoricsError(
        f"first return index exceeds the bound {limit}; combinatorics unbounded for N_max={n_max}",
        bound=limit,
    )


def _eta_outer(lift: CircleLift, m: int, p: int, y: np.ndarray) -> np.ndarray:
    values = lift.omega + y
    for _ in range(m - 1):
        values = lift(values)
    return values - p


def _shift(omega: Any, y: np.ndarray) -> np.ndarray:
    return omega + y


def extract_pair(lift: AnyLift, settings: PairSettings | None = None) -> CommutingPair:
    """Normalized commuting pair ``(F^m - p, F)`` of a lift.

    Exact rotations give the affine pair with ``s = 1/theta - floor(1/theta)``;
    critical lifts give cubic sandwiches through ``u(x) = (F(x) - omega) / x^3``.
    """

    settings = settings or PairSettings()
    m, p, f_m = first_return(lift, settings.n_max)
    a = f_m - 1
    b = lift.omega
    source = f"{type(lift).__name__}({_describe(lift)}) m={m}"
    meta = {"heights": (), "source": source}

    if isinstance(lift, RigidRotation):
        pair = CommutingPair(eta=AffineMap(a), xi=AffineMap(b), meta=meta)
    else:
        kappa, degree = settings.kappa, settings.degree
        xi_inner = fit(lift.inner_factor, (1 + kappa) * a, -kappa * a, degree)
        eta_inner = fit(lift.inner_factor, -kappa * b, (1 + kappa) * b, degree)
        xi_outer = fit(partial(_shift, b), *cube_range(xi_inner), degree)
        eta_outer = fit(partial(_eta_outer, lift, m, p), *cube_range(eta_inner), degree)
        pair = CommutingPair(
            eta=CubicMap(outer=eta_outer, inner=eta_inner),
            xi=CubicMap(outer=xi_outer, inner=xi_inner),
            meta=meta,
        )
    LOGGER.info("extracted %s pair: m=%d a=%r b=%r", pair.kind, m, a, b)
    return normalize(pair)


def _describe(lift: AnyLift) -> str:
    if isinstance(lift, RigidRotation):
        return f"theta={float(lift.theta)!r}"
    return f"omega={float(lift.omega)!r}, c={lift.c!r}"


def closest_return_ratios(lift: AnyLift, target: Any, count: int) -> list[float]:
    """Ratios ``|F^(q_(k+1))(0) - p_(k+1)| / |F^(q_k)(0) - p_k|`` along the target's convergents."""

    target = _as_target(target)
    wanted = list(_take(iter_convergents(target.iter_entries()), count + 1))
    distances: list[Any] = []
    orbit = iterate_orbit(lift, wanted[-1][1] + 1)
    j, n, f = 0, 0, 0.0
    for p, q in wanted:
        while j < q:
            j, n, f = next(orbit)
        distances.append(abs((n - p) + f))
    ratios = []
    for before, after in zip(distances, distances[1:]):
        if before == 0:
            raise DomainError("closest return landed exactly; the lift has rational rotation number")
        ratios.append(float(after / before))
    return ratios


def _take(iterator: Iterator[tuple[int, int]], count: int) -> Iterator[tuple[int, int]]:
    for _, item in zip(range(count), iterator):
        yield item


def rigid_baseline(target: Any) -> float:
    """Closest-return ratio limit of the exact rotation: the target itself for period-one words."""

    target = _as_target(target)
    ratios = closest_return_ratios(RigidRotation(target.value()), target, 12)
    return ratios[-1]
