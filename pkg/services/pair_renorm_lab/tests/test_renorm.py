"""Tests for heights, single renormalization steps and renormalization orbits."""

from __future__ import annotations

import numpy as np
import pytest

from pair_renorm_lab.circle_maps import CircleLift, extract_pair, tune_omega
from pair_renorm_lab.combinatorics import ContinuedFraction, gauss, quadratic_irrational
from pair_renorm_lab.errors import DomainError, NotRenormalizable, UnboundedTypeError
from pair_renorm_lab.numerics import configure_precision
from pair_renorm_lab.pairs import AffineMap, CommutingPair, conjugate, glued_rotation_number, normalize, validate
from pair_renorm_lab.renorm import OrbitRecord, RenormSettings, height, renorm_orbit, renormalize, scaling_ratios


def _make_affine_pair(s: float) -> CommutingPair:
    return CommutingPair(eta=AffineMap(-s), xi=AffineMap(1.0))


def _away_from_small_rationals(s: float) -> bool:
    return all(abs(s * q - round(s * q)) > 1e-6 * q for q in range(1, 31))


def test_height_of_affine_pairs() -> None:
    assert height(_make_affine_pair(0.4)) == 2
    assert height(_make_affine_pair(quadratic_irrational([1]))) == 1
    with pytest.raises(NotRenormalizable):
        height(_make_affine_pair(1.5))
    with pytest.raises(UnboundedTypeError):
        height(_make_affine_pair(0.01), n_max=20)


def test_affine_renormalization_applies_the_gauss_map() -> None:
    pair, step = renormalize(_make_affine_pair(0.4))

    assert step.height == 2
    assert pair.a == pytest.approx(-0.5, abs=1e-15)
    assert pair.b == 1.0
    assert pair.heights == (2,)


def test_affine_renormalization_matches_the_gauss_law() -> None:
    rng = np.random.default_rng(11)
    samples = [s for s in rng.uniform(0.1, 0.9, size=1200) if _away_from_small_rationals(s)][:1000]

    for s in samples:
        pair, step = renormalize(_make_affine_pair(s))
        assert step.height == int(1 / s)
        assert pair.a == pytest.approx(-((1 / s) % 1), abs=1e-12)


def test_golden_affine_pair_is_a_fixed_point() -> None:
    theta = quadratic_irrational([1])
    pair = _make_affine_pair(theta)

    for _ in range(10):
        pair, _ = renormalize(pair)

    assert pair.a == pytest.approx(-theta, abs=1e-11)


def test_silver_affine_orbit_has_constant_heights() -> None:
    record = renorm_orbit(_make_affine_pair(quadratic_irrational([2])), 6)

    assert record.stop_reason == "completed"
    assert record.heights == (2,) * 6


def test_rational_affine_orbit_runs_out_of_combinatorics() -> None:
    completed = renorm_orbit(_make_affine_pair(0.4), 2)
    stopped = renorm_orbit(_make_affine_pair(0.4), 3)

    assert completed.stop_reason == "completed"
    assert [pair.a for pair in completed.pairs[:2]] == pytest.approx([-0.4, -0.5], abs=1e-15)
    assert abs(completed.pairs[2].a) < 1e-14
    assert stopped.stop_reason == "unbounded-type"
    assert len(stopped) == 3
    assert stopped.heights == (2, 2)


def test_orbit_length_is_capped_by_precision() -> None:
    with pytest.raises(DomainError):
        renorm_orbit(_make_affine_pair(0.4), 13)

    configure_precision("extended")
    record = renorm_orbit(_make_affine_pair(quadratic_irrational([1])), 13)
    assert len(record) == 14


def test_scaling_ratios_of_affine_golden_orbit() -> None:
    theta = quadratic_irrational([1])
    record = renorm_orbit(_make_affine_pair(theta), 4)

    assert scaling_ratios(record) == pytest.approx([theta] * 5, abs=1e-12)
    with pytest.raises(DomainError):
        scaling_ratios(renorm_orbit(_make_affine_pair(theta), 0))


def test_golden_cubic_orbit(golden_orbit: OrbitRecord) -> None:
    assert golden_orbit.stop_reason == "completed"
    assert golden_orbit.heights == (1,) * 8
    assert all(pair.normalized for pair in golden_orbit.pairs)
    assert all(step.residual_after < 1e-8 for step in golden_orbit.steps)
    assert abs(golden_orbit.pairs[-1].a) == pytest.approx(0.776, abs=0.01)


def test_silver_cubic_pair_has_height_two(silver_pair: CommutingPair) -> None:
    record = renorm_orbit(silver_pair, 4)

    assert record.stop_reason == "completed"
    assert record.heights == (2,) * 4
    assert validate(record.pairs[-1]).passed(1e-8)


def test_exact_zero_landing_is_not_renormalizable() -> None:
    with pytest.raises(NotRenormalizable):
        height(_make_affine_pair(0.5))
    with pytest.raises(NotRenormalizable):
        renormalize(_make_affine_pair(0.25))

    record = renorm_orbit(_make_affine_pair(0.5), 3)

    assert record.stop_reason == "not-renormalizable"
    assert len(record) == 1


def test_orbit_stops_when_the_residual_passes_the_noise_floor(golden_pair: CommutingPair) -> None:
    strict = RenormSettings(noise_floor=0.0)

    cubic = renorm_orbit(golden_pair, 3, strict)
    affine = renorm_orbit(_make_affine_pair(quadratic_irrational([1])), 3, strict)

    assert cubic.stop_reason == "noise-floor"
    assert len(cubic) == 1
    assert "residual" in cubic.detail
    assert affine.stop_reason == "completed"


def test_silver_sine_family_pair_has_height_two_for_seven_steps() -> None:
    tuning = tune_omega(0.0, ContinuedFraction(period=(2,)), 1e-10)
    pair = extract_pair(CircleLift(tuning.omega, 0.0))

    record = renorm_orbit(pair, 7)

    assert record.stop_reason == "completed"
    assert record.heights == (2,) * 7
    assert all(step.residual_after < 1e-8 for step in record.steps)


def test_renormalization_commutes_with_conjugation(golden_pair: CommutingPair) -> None:
    reference, _ = renormalize(golden_pair)
    eta_points = np.linspace(0.05, 0.95, 19)
    xi_points = np.linspace(0.95, 0.05, 19) * reference.a

    for factor in (0.5, 2.0, 3.7):
        renormalized, step = renormalize(normalize(conjugate(golden_pair, factor)))
        assert step.height == 1
        assert np.max(np.abs(renormalized.eta(eta_points) - reference.eta(eta_points))) < 1e-11
        assert np.max(np.abs(renormalized.xi(xi_points) - reference.xi(xi_points))) < 1e-11


def _inverse_rotation_offset(pair: CommutingPair) -> float:
    return 1 / glued_rotation_number(pair).value - 1


def test_renormalization_acts_on_glued_rotation_numbers_by_the_gauss_map(golden_orbit: OrbitRecord) -> None:
    rng = np.random.default_rng(23)
    for s in [s for s in rng.uniform(0.1, 0.9, size=80) if _away_from_small_rationals(s)][:50]:
        pair = _make_affine_pair(s)
        renormalized, _ = renormalize(pair)
        assert abs(_inverse_rotation_offset(renormalized) - gauss(_inverse_rotation_offset(pair))) < 1e-7

    for before, after in zip(golden_orbit.pairs[:3], golden_orbit.pairs[1:4]):
        assert abs(_inverse_rotation_offset(after) - gauss(_inverse_rotation_offset(before))) < 1e-7
