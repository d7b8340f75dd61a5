"""Distances between pairs, contraction-rate fits and the experiment suite.

Experiments tune circle lifts, extract pairs and follow renormalization
orbits; independent orbits run in worker threads and the reports are
assembled in a fixed order so reruns are identical.
"""

from __future__ import annotations

import asyncio
import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable, NamedTuple, Optional, Sequence, TypeVar

import numpy as np

from .circle_maps import CircleLift, TuningResult, closest_return_ratios, extract_pair, rigid_baseline, tune_omega
from .combinatorics import ContinuedFraction, SymbolWord
from .errors import AnalyticDomainError, CombinatoricsError, DomainError, FitError, NormalizationError
from .pairs import CommutingPair, CriticalMap, commutation_residual, grid
from .renorm import OrbitRecord, renorm_orbit

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .config import ExperimentConfig

LOGGER = logging.getLogger(__name__)

T = TypeVar("T")

MAX_WORKERS = 2
FIT_START = 2
MIN_FIT_POINTS = 4
MIN_REPORTED_R2 = 0.9
RATIO_COUNT = 14


@dataclass(frozen=True)
class MetricSettings:
    grid: int = 257
    ellipse: float = 1.15
    ellipse_samples: int = 64

    def __post_init__(self) -> None:
        if self.grid < 33:
            raise DomainError(f"metric grids need at least 33 points, got {self.grid}")
        if not self.ellipse > 1:
            raise DomainError(f"ellipse parameter must exceed 1, got {self.ellipse}")


# metrics


def _require_normalized(*pairs: CommutingPair) -> None:
    for pair in pairs:
        if not pair.normalized:
            raise NormalizationError(f"distances need normalized pairs, got xi(0) = {float(pair.b)!r}", b=pair.b)


def _operative_intervals(p: CommutingPair, q: CommutingPair) -> list[tuple[str, Any, Any]]:
    return [("eta", 0.0, 1.0), ("xi", max(p.a, q.a), 0.0)]


def _branch(pair: CommutingPair, name: str) -> CriticalMap:
    return pair.eta if name == "eta" else pair.xi


def dist_ck(p: CommutingPair, q: CommutingPair, k: int, settings: MetricSettings | None = None) -> float:
    """Max over the grid and over orders ``0..k`` of branch derivative differences."""

    if not 0 <= k <= 3:
        raise DomainError(f"derivative order must be in 0..3, got {k}")
    settings = settings or MetricSettings()
    _require_normalized(p, q)
    worst = 0.0
    for name, lo, hi in _operative_intervals(p, q):
        points = grid(lo, hi, settings.grid)
        left = _branch(p, name).derivatives(points, k)
        right = _branch(q, name).derivatives(points, k)
        for order in range(k + 1):
            worst = max(worst, float(np.max(np.abs(np.asarray(left[order]) - np.asarray(right[order])))))
    return worst


def dist_c0(p: CommutingPair, q: CommutingPair, settings: MetricSettings | None = None) -> float:
    return dist_ck(p, q, 0, settings)


def ellipse_points(lo: Any, hi: Any, parameter: float, samples: int) -> np.ndarray:
    """Points of the Bernstein ellipse with foci ``lo``, ``hi`` and sum of semi-axes ``parameter``."""

    angles = 2 * np.pi * np.arange(samples) / samples
    w = parameter * np.exp(1j * angles)
    t = (w + 1 / w) / 2
    mid, half = (float(lo) + float(hi)) / 2, (float(hi) - float(lo)) / 2
    return mid + half * t


def dist_analytic(
    p: CommutingPair,
    q: CommutingPair,
    ellipse: float | None = None,
    settings: MetricSettings | None = None,
) -> float:
    """Max modulus of branch differences on Bernstein ellipses around the operative intervals.

    Raises :class:`AnalyticDomainError` when a branch series does not
    certify the sampled points.
    """

    settings = settings or MetricSettings()
    parameter = settings.ellipse if ellipse is None else ellipse
    if not parameter > 1:
        raise DomainError(f"ellipse parameter must exceed 1, got {parameter}")
    _require_normalized(p, q)
    worst = 0.0
    for name, lo, hi in _operative_intervals(p, q):
        left, right = _branch(p, name), _branch(q, name)
        for z in ellipse_points(lo, hi, parameter, settings.ellipse_samples):
            value_p, _ = left.eval_complex(complex(z))
            value_q, _ = right.eval_complex(complex(z))
            worst = max(worst, abs(value_p - value_q))
    return worst


class ContractionFit(NamedTuple):
    rate: float
    r2: float


def fit_contraction_rate(distances: Sequence[float]) -> ContractionFit:
    """Exponentiated least-squares slope of ``log d_n`` against ``n``.

    Nonpositive and non-finite entries are dropped but keep their index.
    """

    values = np.asarray(distances, dtype=np.float64)
    index = np.arange(values.size, dtype=np.float64)
    usable = np.isfinite(values) & (values > 0)
    if int(usable.sum()) < MIN_FIT_POINTS:
        raise FitError(
            f"contraction fit needs at least {MIN_FIT_POINTS} positive distances, got {int(usable.sum())}",
            usable=int(usable.sum()),
        )
    x, y = index[usable], np.log(values[usable])
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if total == 0.0 else 1.0 - float(np.sum(residual**2)) / total
    return ContractionFit(rate=math.exp(slope), r2=r2)


def _reported_fit(distances: Sequence[float]) -> tuple[Optional[float], Optional[float]]:
    try:
        fitted = fit_contraction_rate(distances)
    except FitError as exc:
        LOGGER.info("no contraction fit: %s", exc)
        return None, None
    if fitted.r2 < MIN_REPORTED_R2:
        LOGGER.warning("contraction fit rejected: r2=%.3f below %.2f", fitted.r2, MIN_REPORTED_R2)
        return None, fitted.r2
    return fitted.rate, fitted.r2


# orbit tables


@dataclass(frozen=True)
class OrbitRow:
    k: int
    height: Optional[int]
    eta0: float
    residual: float
    decay: float
    d_c0_prev: Optional[float]
    d_c3_prev: Optional[float]


def orbit_table(record: OrbitRecord, settings: MetricSettings | None = None) -> list[OrbitRow]:
    """One row per stored pair; distances compare with the previous pair."""

    settings = settings or MetricSettings()
    rows: list[OrbitRow] = []
    for k, pair in enumerate(record.pairs):
        if k == 0:
            residual = commutation_residual(pair)
            d_c0 = d_c3 = None
        else:
            residual = record.steps[k - 1].residual_after
            previous = record.pairs[k - 1]
            d_c0 = dist_c0(previous, pair, settings)
            d_c3 = dist_ck(previous, pair, 3, settings)
        rows.append(
            OrbitRow(
                k=k,
                height=record.steps[k].height if k < len(record.steps) else None,
                eta0=float(pair.a),
                residual=float(residual),
                decay=float(pair.decay),
                d_c0_prev=d_c0,
                d_c3_prev=d_c3,
            )
        )
    return rows


# experiments


@dataclass(frozen=True)
class FamilyRun:
    """One tuned lift with its extracted pair and renormalization orbit."""

    c: float
    tuning: TuningResult
    lift: CircleLift
    orbit: OrbitRecord


async def _gather(jobs: Sequence[Callable[[], T]]) -> list[T]:
    semaphore = asyncio.Semaphore(MAX_WORKERS)

    async def run(job: Callable[[], T]) -> T:
        async with semaphore:
            return await asyncio.to_thread(job)

    return list(await asyncio.gather(*(run(job) for job in jobs)))


def run_concurrently(jobs: Sequence[Callable[[], T]]) -> list[T]:
    """Run independent jobs in worker threads; results keep the job order."""

    return asyncio.run(_gather(jobs))


def _family(c: float, target: ContinuedFraction, cfg: "ExperimentConfig", omega_shift: float = 0.0) -> FamilyRun:
    tuning = tune_omega(c, target, cfg.tol)
    omega = tuning.omega
    if omega_shift:
        omega = min(max(omega + omega_shift, 0.0), 1.0)
        LOGGER.info("family c=%s: omega perturbed by %.3e to %r", c, omega_shift, omega)
    lift = CircleLift(omega, c)
    pair = extract_pair(lift, cfg.pair_settings())
    orbit = renorm_orbit(pair, cfg.steps, cfg.renorm_settings())
    return FamilyRun(c=c, tuning=tuning, lift=lift, orbit=orbit)


def _omega_shift(cfg: "ExperimentConfig") -> float:
    if not cfg.omega_noise:
        return 0.0
    rng = np.random.default_rng(cfg.seed)
    return float(cfg.omega_noise * rng.standard_normal())


@dataclass(frozen=True)
class DistanceRow:
    step: int
    d_c0: float
    d_c3: float
    d_analytic: Optional[float]
    height_a: Optional[int]
    height_b: Optional[int]


def _pair_distances(p: CommutingPair, q: CommutingPair, settings: MetricSettings) -> tuple[float, float, Optional[float]]:
    d_c0 = dist_c0(p, q, settings)
    d_c3 = dist_ck(p, q, 3, settings)
    try:
        d_analytic: Optional[float] = dist_analytic(p, q, settings=settings)
    except AnalyticDomainError as exc:
        LOGGER.warning("analytic distance uncertified: %s", exc)
        d_analytic = None
    return d_c0, d_c3, d_analytic


def _height_at(orbit: OrbitRecord, k: int) -> Optional[int]:
    return orbit.steps[k].height if k < len(orbit.steps) else None


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-step distances between two orbits and their fitted contraction."""

    target: str
    rows: tuple[DistanceRow, ...]
    rate: Optional[float]
    r2: Optional[float]
    stop_reasons: dict[str, str]
    limits: dict[str, float]
    runs: tuple[FamilyRun, ...] = field(default=(), repr=False, compare=False)

    @property
    def distances(self) -> list[float]:
        return [row.d_c0 for row in self.rows]

    def summary(self) -> dict[str, Any]:
        return {"lambda": self.rate, "r2": self.r2, "stop_reason": self.stop_reasons, "limits": self.limits}


def _convergence(target: str, run_a: FamilyRun, run_b: FamilyRun, settings: MetricSettings) -> ConvergenceReport:
    rows = []
    for k in range(min(len(run_a.orbit), len(run_b.orbit))):
        d_c0, d_c3, d_analytic = _pair_distances(run_a.orbit.pairs[k], run_b.orbit.pairs[k], settings)
        rows.append(
            DistanceRow(
                step=k,
                d_c0=d_c0,
                d_c3=d_c3,
                d_analytic=d_analytic,
                height_a=_height_at(run_a.orbit, k),
                height_b=_height_at(run_b.orbit, k),
            )
        )
    rate, r2 = _reported_fit([row.d_c0 for row in rows if row.step >= FIT_START])
    return ConvergenceReport(
        target=target,
        rows=tuple(rows),
        rate=rate,
        r2=r2,
        stop_reasons={"a": run_a.orbit.stop_reason, "b": run_b.orbit.stop_reason},
        limits={"eta0_a": abs(float(run_a.orbit.pairs[-1].a)), "eta0_b": abs(float(run_b.orbit.pairs[-1].a))},
        runs=(run_a, run_b),
    )


def universality_experiment(cfg: "ExperimentConfig") -> ConvergenceReport:
    """Orbits of two families tuned to one combinatorics, compared step by step."""

    target = cfg.target
    shift = _omega_shift(cfg)
    run_a, run_b = run_concurrently(
        [
            lambda: _family(cfg.c, target, cfg),
            lambda: _family(cfg.c_prime, target, cfg, shift),
        ]
    )
    report = _convergence(str(target), run_a, run_b, cfg.metric_settings())
    LOGGER.info("universality %s: c=%s vs c'=%s lambda=%s r2=%s", target, cfg.c, cfg.c_prime, report.rate, report.r2)
    return report


@dataclass(frozen=True)
class ShiftReport:
    """Heights along one orbit against the word they should spell."""

    word: tuple[int, ...]
    target: str
    expected_heights: tuple[int, ...]
    observed_heights: tuple[int, ...]
    periodic_distances: tuple[tuple[int, float], ...]
    rate: Optional[float]
    r2: Optional[float]
    stop_reason: str
    run: Optional[FamilyRun] = field(default=None, repr=False, compare=False)

    @property
    def heights_match(self) -> bool:
        observed = self.observed_heights
        return observed == self.expected_heights[: len(observed)]

    def summary(self) -> dict[str, Any]:
        return {
            "lambda": self.rate,
            "r2": self.r2,
            "stop_reason": self.stop_reason,
            "limits": {"heights_match": self.heights_match},
        }


def _symbol_word(cfg: "ExperimentConfig") -> SymbolWord:
    target = cfg.target
    if target.preperiod or not target.period:
        raise CombinatoricsError(f"shift words must be purely periodic, got {target}", word=str(target))
    return target.word(alphabet=cfg.n_max)


def shift_experiment(cfg: "ExperimentConfig") -> ShiftReport:
    """Heights along the orbit spell the word; periodic words give periodic orbits.

    The height of ``R^k zeta`` is the ``(k + 2)``-th entry of the tuned
    continued fraction, so the target repeats the word rotated right by one.
    """

    word = _symbol_word(cfg)
    period = len(word)
    target = word.rotated(-1).periodic()
    run = _family(cfg.c, target, cfg)
    orbit = run.orbit
    expected = tuple(word.symbols[k % period] for k in range(cfg.steps))
    settings = cfg.metric_settings()
    distances = tuple(
        (k, dist_c0(orbit.pairs[k], orbit.pairs[k + period], settings)) for k in range(len(orbit.pairs) - period)
    )
    rate, r2 = _reported_fit([value for _, value in distances])
    report = ShiftReport(
        word=word.symbols,
        target=str(target),
        expected_heights=expected,
        observed_heights=orbit.heights,
        periodic_distances=distances,
        rate=rate,
        r2=r2,
        stop_reason=orbit.stop_reason,
        run=run,
    )
    if not report.heights_match:
        LOGGER.warning("heights %s do not spell %s", orbit.heights, expected)
    return report


@dataclass(frozen=True)
class ScalingReport:
    """Rescaling magnitudes ``|eta_k(0)|`` of two families and their reference values."""

    target: str
    eta0_a: tuple[float, ...]
    eta0_b: tuple[float, ...]
    direct_ratio: float
    rigid_baseline: float
    stop_reasons: dict[str, str]

    @property
    def limit_a(self) -> float:
        return self.eta0_a[-1]

    @property
    def limit_b(self) -> float:
        return self.eta0_b[-1]

    @property
    def common_limit(self) -> float:
        return (self.limit_a + self.limit_b) / 2

    @property
    def family_gap(self) -> float:
        return abs(self.limit_a - self.limit_b)

    def summary(self) -> dict[str, Any]:
        return {
            "lambda": None,
            "r2": None,
            "stop_reason": self.stop_reasons,
            "limits": {
                "eta0_a": self.limit_a,
                "eta0_b": self.limit_b,
                "common": self.common_limit,
                "family_gap": self.family_gap,
                "direct_ratio": self.direct_ratio,
                "rigid_baseline": self.rigid_baseline,
            },
        }


def scaling_study(cfg: "ExperimentConfig") -> ScalingReport:
    """Compare orbit scalings of two families with the direct closest-return ratio."""

    target = cfg.target
    run_a, run_b = run_concurrently(
        [
            lambda: _family(cfg.c, target, cfg),
            lambda: _family(cfg.c_prime, target, cfg),
        ]
    )
    direct = closest_return_ratios(run_a.lift, target, RATIO_COUNT)[-1]
    report = ScalingReport(
        target=str(target),
        eta0_a=tuple(abs(float(pair.a)) for pair in run_a.orbit.pairs),
        eta0_b=tuple(abs(float(pair.a)) for pair in run_b.orbit.pairs),
        direct_ratio=direct,
        rigid_baseline=rigid_baseline(target),
        stop_reasons={"a": run_a.orbit.stop_reason, "b": run_b.orbit.stop_reason},
    )
    LOGGER.info(
        "scaling %s: limits %.6f / %.6f, direct %.6f, rigid %.6f",
        target,
        report.limit_a,
        report.limit_b,
        report.direct_ratio,
        report.rigid_baseline,
    )
    return report


@dataclass(frozen=True)
class StableSetRow:
    k: int
    j: int
    d_c0: float
    heights_agree: bool


@dataclass(frozen=True)
class StableSetReport:
    """Distances between a periodic orbit and one that reaches the same tail later."""

    periodic_target: str
    eventual_target: str
    rows: tuple[StableSetRow, ...]
    rate: Optional[float]
    r2: Optional[float]
    stop_reasons: dict[str, str]

    def summary(self) -> dict[str, Any]:
        agree = all(row.heights_agree for row in self.rows)
        return {"lambda": self.rate, "r2": self.r2, "stop_reason": self.stop_reasons, "limits": {"heights_agree": agree}}


def stable_set_experiment(cfg: "ExperimentConfig") -> StableSetReport:
    """Tune to ``(w)`` and to ``pre, (w)``; aligned orbits approach each other.

    With a pre-period of length ``r`` and period ``p``, step ``k`` of the
    second orbit carries the combinatorics of step ``j = k - (r mod p)`` of
    the first one once ``k + 2 > r``.
    """

    periodic = ContinuedFraction(period=_symbol_word(cfg).symbols)
    preperiod = ContinuedFraction.parse(cfg.preperiod)
    if preperiod.period:
        raise CombinatoricsError(f"pre-period must be a finite word, got {preperiod}", word=cfg.preperiod)
    eventual = ContinuedFraction(preperiod=preperiod.preperiod, period=periodic.period)
    run_a, run_b = run_concurrently(
        [
            lambda: _family(cfg.c, periodic, cfg),
            lambda: _family(cfg.c, eventual, cfg),
        ]
    )
    r, p = len(eventual.preperiod), len(periodic.period)
    offset = r % p
    settings = cfg.metric_settings()
    rows = []
    for k in range(max(r - 1, offset), len(run_b.orbit)):
        j = k - offset
        if j >= len(run_a.orbit):
            break
        rows.append(
            StableSetRow(
                k=k,
                j=j,
                d_c0=dist_c0(run_b.orbit.pairs[k], run_a.orbit.pairs[j], settings),
                heights_agree=_height_at(run_b.orbit, k) == _height_at(run_a.orbit, j),
            )
        )
    rate, r2 = _reported_fit([row.d_c0 for row in rows])
    return StableSetReport(
        periodic_target=str(periodic),
        eventual_target=str(eventual),
        rows=tuple(rows),
        rate=rate,
        r2=r2,
        stop_reasons={"a": run_a.orbit.stop_reason, "b": run_b.orbit.stop_reason},
    )
