"""Tests for critical lifts, rotation numbers, tuning and pair extraction."""

from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest

from pair_renorm_lab.circle_maps import (
    CircleLift,
    RigidRotation,
    TuningResult,
    closest_return_ratios,
    extract_pair,
    first_return,
    lift_deriv,
    lift_eval,
    rigid_baseline,
    rotation_number,
    tune_omega,
)
from pair_renorm_lab.combinatorics import ContinuedFraction, gauss, quadratic_irrational
from pair_renorm_lab.errors import CombinatoricsError, DomainError, RationalTargetError
from pair_renorm_lab.pairs import CommutingPair, validate

GOLDEN = ContinuedFraction(period=(1,))
UNIVERSAL_GOLDEN_RATIO = 0.7760


def test_lift_value_and_degree_one_periodicity() -> None:
    lift = CircleLift(0.3, 0.25)

    assert lift_eval(CircleLift(0.3, 0.0), 0.0) == 0.3
    for x in np.linspace(-1.0, 2.0, 13):
        assert lift(x + 1) - lift(x) == pytest.approx(1.0, abs=1e-12)


def test_critical_point_is_cubic() -> None:
    lift = CircleLift(0.2, 0.5)
    h = 1e-3
    third = (lift(2 * h) - 3 * lift(h) + 3 * lift(0.0) - lift(-h)) / h**3

    assert lift_deriv(lift, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert lift.derivative(0.5) > 0
    assert abs(third) > 1.0


def test_zero_parameter_is_the_sine_family() -> None:
    lift = CircleLift(0.37, 0.0)
    points = np.linspace(0.0, 1.0, 21)
    expected = points + 0.37 - np.sin(2 * np.pi * points) / (2 * np.pi)

    assert np.max(np.abs(lift(points) - expected)) < 1e-15


def test_derivative_matches_finite_differences() -> None:
    lift = CircleLift(0.1, -0.4)
    h = 1e-6

    for x in (0.1, 0.33, 0.8):
        central = (lift(x + h) - lift(x - h)) / (2 * h)
        assert lift.derivative(x) == pytest.approx(central, rel=1e-6)


def _exact_critical_factor(c: float, x: float) -> float:
    with mpmath.workdps(50):
        x, c = mpmath.mpf(x), mpmath.mpf(c)
        two_pi = 2 * mpmath.pi
        periodic = (c - 1) * mpmath.sin(two_pi * x) / two_pi - (c / 2) * mpmath.sin(2 * two_pi * x) / (2 * two_pi)
        return float((x + periodic / (1 - c / 2)) / x**3)


def test_critical_factor_series_agrees_with_the_direct_formula_at_the_switch() -> None:
    lift = CircleLift(0.4, 0.3)
    below = np.array([-0.0099999, 0.005, 0.0099999])
    above = np.array([0.0100001, 0.02])

    for x, value in zip(below, lift.critical_factor(below)):
        assert value == pytest.approx(_exact_critical_factor(0.3, float(x)), rel=1e-13)
    for x, value in zip(above, lift.critical_factor(above)):
        series = np.polynomial.polynomial.polyval(x**2, lift.series_coefficients)
        assert value == pytest.approx(series, rel=1e-10)
    assert lift.critical_factor(np.array([0.0]))[0] == pytest.approx(4 * math.pi**2 / 6 / 0.85 * 0.7 + 0.15 * 16 * math.pi**2 / 6 / 0.85)


def test_inner_factor_cubes_to_the_lift() -> None:
    lift = CircleLift(0.45, 0.6)
    points = np.array([-0.3, -0.01, 0.0, 0.004, 0.2, 0.7])

    cubes = lift.inner_factor(points) ** 3

    assert np.max(np.abs(cubes - (lift(points) - lift.omega))) < 1e-14


def test_lift_parameters_are_validated() -> None:
    with pytest.raises(DomainError):
        CircleLift(0.3, 0.95)
    with pytest.raises(DomainError):
        CircleLift(1.5, 0.0)
    with pytest.raises(DomainError):
        RigidRotation(1.0)


def test_rigid_rational_rotation_returns_exactly() -> None:
    assert rotation_number(RigidRotation(0.25), 1e-12) == 0.25


def test_rigid_irrational_rotations_recover_the_angle() -> None:
    rng = np.random.default_rng(7)
    for theta in rng.uniform(0.05, 0.95, size=50):
        assert rotation_number(RigidRotation(theta), 1e-12) == pytest.approx(theta, abs=1e-12)


def test_rotation_tolerance_below_roundoff_is_rejected() -> None:
    with pytest.raises(DomainError):
        rotation_number(RigidRotation(0.3), 0.0)


def test_rotation_number_is_monotone_in_omega() -> None:
    values = [rotation_number(CircleLift(omega, 0.0), 1e-6) for omega in (0.29, 0.3, 0.31)]

    assert values[0] <= values[1] + 1e-6
    assert values[1] <= values[2] + 1e-6


def test_tuning_reaches_the_golden_rotation_number(golden_tuning: TuningResult, golden_lift: CircleLift) -> None:
    measured = rotation_number(golden_lift, 1e-12)

    assert golden_tuning.steps <= 60
    assert golden_tuning.target == GOLDEN
    assert measured == pytest.approx(quadratic_irrational([1]), abs=1e-10)


def test_tuning_refuses_rational_targets() -> None:
    with pytest.raises(RationalTargetError):
        tune_omega(0.0, 0.5, 1e-10)
    with pytest.raises(RationalTargetError):
        tune_omega(0.0, ContinuedFraction(preperiod=(2,)), 1e-10)


def test_tuning_tolerance_floor() -> None:
    with pytest.raises(DomainError):
        tune_omega(0.0, GOLDEN, 1e-13)


def test_first_return_of_rigid_rotations() -> None:
    assert first_return(RigidRotation(0.7), 20)[0] == 1
    m, p, _ = first_return(RigidRotation(0.4), 20)
    assert (m, p) == (2, 1)
    with pytest.raises(CombinatoricsError):
        first_return(RigidRotation(0.01), 20)


def test_extract_affine_pairs_from_rigid_rotations() -> None:
    golden = extract_pair(RigidRotation(quadratic_irrational([1])))
    seven = extract_pair(RigidRotation(0.7))
    four = extract_pair(RigidRotation(0.4))

    assert golden.kind == "affine"
    assert golden.a == pytest.approx(-quadratic_irrational([1]), abs=1e-15)
    assert seven.a == pytest.approx(-3 / 7, abs=1e-15)
    assert four.a == pytest.approx(-0.5, abs=1e-15)
    assert all(pair.normalized for pair in (golden, seven, four))
    assert "m=2" in four.meta["source"]


def test_rigid_rotation_pairs_carry_the_gauss_image_of_the_angle() -> None:
    rng = np.random.default_rng(13)
    for theta in rng.uniform(0.1, 0.9, size=50):
        pair = extract_pair(RigidRotation(theta))

        assert pair.kind == "affine"
        assert pair.a == pytest.approx(-gauss(theta), abs=1e-12)
        assert f"m={int(1 / theta)}" in pair.meta["source"]


def test_extracted_cubic_pair_is_a_valid_normalized_pair(golden_pair: CommutingPair) -> None:
    report = validate(golden_pair)

    assert golden_pair.kind == "cubic"
    assert golden_pair.normalized
    assert golden_pair.a < 0
    assert report.residual < 1e-10
    assert report.passed(1e-8)


def test_rigid_closest_returns_scale_by_the_angle() -> None:
    theta = quadratic_irrational([1])
    ratios = closest_return_ratios(RigidRotation(theta), GOLDEN, 12)

    assert ratios == pytest.approx([theta] * 12, abs=1e-9)
    assert rigid_baseline(GOLDEN) == pytest.approx(theta, abs=1e-9)


def test_critical_closest_returns_scale_by_the_universal_ratio(golden_lift: CircleLift) -> None:
    ratios = closest_return_ratios(golden_lift, GOLDEN, 14)

    assert ratios[-1] == pytest.approx(UNIVERSAL_GOLDEN_RATIO, abs=0.01)
    assert abs(ratios[-1] - rigid_baseline(GOLDEN)) > 0.05
