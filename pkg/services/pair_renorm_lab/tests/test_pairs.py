"""Tests for commuting pairs: branches, validation, normalization and storage."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from pair_renorm_lab.chebapprox import fit
from pair_renorm_lab.errors import DomainError, InvalidPairError
from pair_renorm_lab.pairs import (
    AffineMap,
    CommutingPair,
    CubicMap,
    commutation_residual,
    conjugate,
    glued_rotation_number,
    normalize,
    read_pair,
    rescale,
    validate,
    write_pair,
)
from pair_renorm_lab.renorm import OrbitRecord, renorm_orbit


def _make_affine_pair(s: float, b: float = 1.0) -> CommutingPair:
    return CommutingPair(eta=AffineMap(-s * b), xi=AffineMap(b))


def _make_folded_pair() -> CommutingPair:
    """Cubic pair whose eta inner factor turns around near 1."""

    eta = CubicMap(
        outer=fit(lambda y: y - 0.4, -2.0, 2.0, 8),
        inner=fit(lambda x: x - x**3, -0.05, 1.05, 8),
    )
    xi = CubicMap(
        outer=fit(lambda y: y + 1.0, -1.0, 1.0, 8),
        inner=fit(lambda x: x, -0.5, 0.05, 8),
    )
    return CommutingPair(eta=eta, xi=xi)


def test_affine_pairs_commute_exactly() -> None:
    report = validate(_make_affine_pair(0.4))

    assert report.residual == 0.0
    assert report.passed(1e-8)


def test_normalize_affine_pair() -> None:
    pair = normalize(_make_affine_pair(0.4, b=2.0))

    assert pair.b == 1.0
    assert pair.a == pytest.approx(-0.4, abs=1e-15)
    assert pair.normalized


def test_normalize_is_identity_on_normalized_pairs() -> None:
    pair = _make_affine_pair(0.3)

    assert normalize(pair) is pair


def test_normalize_rejects_nonpositive_xi_value() -> None:
    pair = CommutingPair(eta=AffineMap(0.3), xi=AffineMap(-1.0))

    with pytest.raises(InvalidPairError):
        normalize(pair)


def test_rescale_and_conjugate_are_inverse_operations() -> None:
    pair = _make_affine_pair(0.25)
    scaled = rescale(pair, 3.0)

    assert scaled.b == pytest.approx(3.0)
    assert conjugate(scaled, 3.0).a == pytest.approx(pair.a, abs=1e-15)
    with pytest.raises(InvalidPairError):
        conjugate(pair, -1.0)


def test_mixed_kinds_are_rejected() -> None:
    folded = _make_folded_pair()

    with pytest.raises(InvalidPairError):
        CommutingPair(eta=AffineMap(-0.4), xi=folded.xi)


def test_validation_reports_a_folded_branch() -> None:
    report = validate(_make_folded_pair())

    assert not report.monotone_ok
    assert report.ordered_ok
    assert not report.passed(1e-8)


def test_glued_rotation_number_of_affine_pair() -> None:
    for s in (0.4, 0.61803398875, 0.25):
        estimate = glued_rotation_number(_make_affine_pair(s))
        assert estimate.value == pytest.approx(1 / (1 + s), abs=1e-9)
        assert estimate.accuracy < 1e-3


def test_glued_rotation_number_of_random_translation_pairs() -> None:
    rng = np.random.default_rng(3)
    for s in rng.uniform(0.1, 0.9, size=100):
        assert glued_rotation_number(_make_affine_pair(float(s))).value == pytest.approx(1 / (1 + s), abs=1e-8)


def test_glued_rotation_number_needs_enough_iterations() -> None:
    with pytest.raises(DomainError):
        glued_rotation_number(_make_affine_pair(0.4), iterations=10)


def test_cubic_pair_derivatives_match_finite_differences(golden_pair: CommutingPair) -> None:
    h = 1e-5
    value, slope = golden_pair.eta.derivatives(np.array([0.5]), order=1)
    central = (golden_pair.eta(0.5 + h) - golden_pair.eta(0.5 - h)) / (2 * h)

    assert value[0] == pytest.approx(golden_pair.eta(0.5), abs=1e-14)
    assert slope[0] == pytest.approx(central, rel=1e-5)


def test_conjugation_commutes_with_normalization(golden_pair: CommutingPair) -> None:
    renormalized = normalize(conjugate(golden_pair, 2.0))
    points = np.linspace(0.1, 0.9, 9)

    assert renormalized.normalized
    assert np.max(np.abs(renormalized.eta(points) - golden_pair.eta(points))) < 1e-12


def test_pair_files_keep_branch_values(tmp_path: Path, golden_pair: CommutingPair) -> None:
    affine = read_pair(write_pair(_make_affine_pair(0.4), tmp_path / "affine.json"))
    cubic = read_pair(write_pair(golden_pair, tmp_path / "nested" / "cubic.json"))

    assert affine.a == -0.4
    assert cubic.kind == "cubic"
    assert cubic.eta(0.3) == golden_pair.eta(0.3)
    assert cubic.meta["source"] == golden_pair.meta["source"]


def test_reading_a_broken_pair_file(tmp_path: Path) -> None:
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")

    with pytest.raises(InvalidPairError):
        read_pair(path)


def test_branches_from_different_families_do_not_commute(
    golden_orbit: OrbitRecord, golden_pair_c_half: CommutingPair
) -> None:
    other = renorm_orbit(golden_pair_c_half, 2)
    mismatched = CommutingPair(eta=golden_orbit.pairs[2].eta, xi=other.pairs[2].xi)

    assert other.stop_reason == "completed"
    assert commutation_residual(golden_orbit.pairs[2]) < 1e-8
    assert commutation_residual(mismatched) > 1e-3
