"""Shared fixtures: precision reset plus tuned lifts and pairs reused across modules."""

from __future__ import annotations

from typing import Iterator

import pytest

from pair_renorm_lab.circle_maps import CircleLift, TuningResult, extract_pair, tune_omega
from pair_renorm_lab.combinatorics import ContinuedFraction
from pair_renorm_lab.numerics import configure_precision
from pair_renorm_lab.pairs import CommutingPair
from pair_renorm_lab.renorm import OrbitRecord, renorm_orbit

GOLDEN = ContinuedFraction(period=(1,))
SILVER = ContinuedFraction(period=(2,))
TUNING_TOL = 1e-10


@pytest.fixture(autouse=True)
def double_precision() -> Iterator[None]:
    """Every test starts and ends in binary64."""

    configure_precision("double")
    yield
    configure_precision("double")


@pytest.fixture(scope="session")
def golden_tuning() -> TuningResult:
    return tune_omega(0.0, GOLDEN, TUNING_TOL)


@pytest.fixture(scope="session")
def golden_lift(golden_tuning: TuningResult) -> CircleLift:
    return CircleLift(golden_tuning.omega, 0.0)


@pytest.fixture(scope="session")
def golden_pair(golden_lift: CircleLift) -> CommutingPair:
    return extract_pair(golden_lift)


@pytest.fixture(scope="session")
def golden_orbit(golden_pair: CommutingPair) -> OrbitRecord:
    return renorm_orbit(golden_pair, 8)


@pytest.fixture(scope="session")
def silver_pair() -> CommutingPair:
    tuning = tune_omega(0.5, SILVER, TUNING_TOL)
    return extract_pair(CircleLift(tuning.omega, 0.5))


@pytest.fixture(scope="session")
def golden_pair_c_half() -> CommutingPair:
    tuning = tune_omega(0.5, GOLDEN, TUNING_TOL)
    return extract_pair(CircleLift(tuning.omega, 0.5))
