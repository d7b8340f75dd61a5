"""The renormalization operator on commuting pairs and its orbit driver.

One step with height ``h`` replaces ``(eta, xi)`` by
``(L^-1 eta^h xi L, L^-1 eta L)`` where ``L(x) = eta(0) x`` reverses
orientation; the result is normalized automatically.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .chebapprox import compose_refit
from .errors import (
    CompositionDomainError,
    DomainError,
    NotRenormalizable,
    PairValidationError,
    UnboundedTypeError,
)
from .numerics import active_precision
from .pairs import AffineMap, CommutingPair, CubicMap, PairSettings, cube_range, normalize, validate

LOGGER = logging.getLogger(__name__)

StopReason = Literal[
    "completed",
    "not-renormalizable",
    "unbounded-type",
    "composition-domain",
    "validation",
    "noise-floor",
    "decay-collapse",
]

RESIDUAL_GROWTH = 10.0


@dataclass(frozen=True)
class RenormSettings:
    noise_floor: float = 1e-6
    decay_floor: float = 1.05
    pair: PairSettings = field(default_factory=PairSettings)

    @property
    def n_max(self) -> int:
        return self.pair.n_max


@dataclass(frozen=True)
class RenormStep:
    """Diagnostics of one renormalization ``zeta_k -> zeta_(k+1)``."""

    height: int
    scale: float
    residual_after: float
    decay_after: float
    eta0_after: float


@dataclass(frozen=True)
class OrbitRecord:
    """Pairs ``zeta_0 .. zeta_n`` with the steps between them and why the orbit ended."""

    pairs: tuple[CommutingPair, ...]
    steps: tuple[RenormStep, ...]
    stop_reason: StopReason
    detail: str = ""

    @property
    def initial(self) -> CommutingPair:
        return self.pairs[0]

    @property
    def heights(self) -> tuple[int, ...]:
        return tuple(step.height for step in self.steps)

    def __len__(self) -> int:
        return len(self.pairs)


def height(pair: CommutingPair, n_max: int = PairSettings.n_max) -> int:
    """``h = max{r >= 0 : eta^r(xi(0)) > 0}``; at least 1 for renormalizable pairs."""

    value = pair.b
    for r in range(1, n_max + 2):
        if not pair.eta.contains(value):
            raise CompositionDomainError(r - 1, pair.b, value)
        value = pair.eta(value)
        if value == 0:
            raise NotRenormalizable(
                f"eta^{r}(xi(0)) lands exactly on 0; the pair is not renormalizable",
                value=value,
                r=r,
            )
        if not value > 0:
            if r == 1:
                raise NotRenormalizable(
                    f"eta(xi(0)) = {float(value)!r} is not positive; the pair has height 0",
                    value=value,
                )
            return r - 1
    raise UnboundedTypeError(
        f"eta^r(xi(0)) stays positive for r up to {n_max + 1}; height exceeds N_max={n_max}",
        n_max=n_max,
    )


def _affine_step(pair: CommutingPair, h: int) -> CommutingPair:
    t_eta, t_xi = pair.eta.offset, pair.xi.offset
    return CommutingPair(
        eta=AffineMap((t_xi + h * t_eta) / t_eta),
        xi=AffineMap(t_eta / t_eta),
        meta=dict(pair.meta),
    )


def _cubic_step(pair: CommutingPair, h: int, settings: PairSettings) -> CommutingPair:
    a = pair.a
    degree = settings.degree
    kappa = settings.kappa

    flipped_xi = pair.xi.conjugated(a)
    eta_inner = flipped_xi.inner
    chain = [np.negative, pair.xi.outer, *([pair.eta] * h), lambda v: v / a]
    eta_outer = compose_refit(chain, *cube_range(eta_inner), degree)
    new_eta = CubicMap(outer=eta_outer, inner=eta_inner)

    a_next = active_precision().real(new_eta(0.0))
    new_xi = pair.eta.conjugated(a).restricted((1 + kappa) * a_next, -kappa * a_next, degree)
    return CommutingPair(eta=new_eta, xi=new_xi, meta=dict(pair.meta))


def renormalize(pair: CommutingPair, settings: PairSettings | None = None) -> tuple[CommutingPair, RenormStep]:
    """One renormalization step; the result is validated before it is returned.

    Cubic branches keep an exact linear conjugation of one inner factor and
    refit the composed outer chain at the configured degree. The output
    residual must stay below ``max(10 x input residual, residual_limit)``.
    """

    settings = settings or PairSettings()
    if not pair.normalized:
        pair = normalize(pair)
    h = height(pair, settings.n_max)
    before = validate(pair, settings).residual

    if pair.kind == "affine":
        renormalized = _affine_step(pair, h)
    else:
        renormalized = _cubic_step(pair, h, settings)
    renormalized = normalize(renormalized)
    renormalized = CommutingPair(
        eta=renormalized.eta,
        xi=renormalized.xi,
        meta={**pair.meta, "heights": (*pair.heights, h)},
    )

    report = validate(renormalized, settings)
    limit = max(RESIDUAL_GROWTH * before, settings.residual_limit)
    if not report.passed(limit):
        raise PairValidationError(
            f"renormalized pair fails validation (residual {report.residual:.3e}, limit {limit:.1e})",
            residual=report.residual,
            monotone_ok=report.monotone_ok,
            critical_ok=report.critical_ok,
            ordered_ok=report.ordered_ok,
        )
    step = RenormStep(
        height=h,
        scale=float(pair.a),
        residual_after=report.residual,
        decay_after=float(renormalized.decay),
        eta0_after=float(renormalized.a),
    )
    return renormalized, step


def renorm_orbit(
    pair: CommutingPair,
    n: int,
    settings: RenormSettings | None = None,
    *,
    check_decay: bool = True,
) -> OrbitRecord:
    """Apply ``renormalize`` up to ``n`` times, stopping early with a recorded reason."""

    settings = settings or RenormSettings()
    cap = active_precision().orbit_cap
    if not 0 <= n <= cap:
        raise DomainError(
            f"orbit length {n} exceeds the {active_precision().name}-precision cap of {cap}",
            steps=n,
            cap=cap,
        )

    pairs = [pair if pair.normalized else normalize(pair)]
    steps: list[RenormStep] = []
    reason: StopReason = "completed"
    detail = ""
    for k in range(n):
        try:
            renormalized, step = renormalize(pairs[-1], settings.pair)
        except NotRenormalizable as exc:
            reason, detail = "not-renormalizable", exc.message
        except UnboundedTypeError as exc:
            reason, detail = "unbounded-type", exc.message
        except CompositionDomainError as exc:
            reason, detail = "composition-domain", exc.message
        except PairValidationError as exc:
            residual = exc.details.get("residual", math.inf)
            reason = "noise-floor" if residual > settings.noise_floor else "validation"
            detail = exc.message
        else:
            if step.residual_after > settings.noise_floor:
                reason = "noise-floor"
                detail = f"commutation residual {step.residual_after:.3e} above {settings.noise_floor:.1e}"
            elif check_decay and step.decay_after < settings.decay_floor:
                reason = "decay-collapse"
                detail = f"coefficient decay {step.decay_after:.4f} below {settings.decay_floor}"
            else:
                pairs.append(renormalized)
                steps.append(step)
                LOGGER.info(
                    "step %d: height=%d eta0=%.12f residual=%.2e decay=%.3f",
                    k + 1,
                    step.height,
                    step.eta0_after,
                    step.residual_after,
                    step.decay_after,
                )
                continue
        LOGGER.warning("orbit stopped after %d of %d steps: %s (%s)", k, n, reason, detail)
        break
    return OrbitRecord(pairs=tuple(pairs), steps=tuple(steps), stop_reason=reason, detail=detail)


def scaling_ratios(record: OrbitRecord) -> list[float]:
    """``|eta_k(0)|`` along the orbit: the rescaling magnitudes of successive steps."""

    if len(record.pairs) < 2:
        raise DomainError("scaling ratios need an orbit with at least two pairs")
    return [float(abs(pair.a)) for pair in record.pairs]
