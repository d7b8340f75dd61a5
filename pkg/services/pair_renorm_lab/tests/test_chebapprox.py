"""Tests for interval-scaled Chebyshev series."""

from __future__ import annotations

import math

import numpy as np
import pytest

from pair_renorm_lab.chebapprox import TAIL_TOLERANCE, ChebSeries, chebyshev_points, compose_refit, decay_rate, fit
from pair_renorm_lab.errors import CompositionDomainError, DomainError, ExtrapolationError, FitError


def test_fit_square_gives_exact_chebyshev_coefficients() -> None:
    series = fit(lambda x: x**2, -1.0, 1.0, 4)

    assert series.coeffs == pytest.approx([0.5, 0.0, 0.5, 0.0, 0.0], abs=1e-15)
    assert series(0.5) == pytest.approx(0.25, abs=1e-14)


def test_fit_reproduces_affine_functions() -> None:
    series = fit(lambda x: x, 0.0, 2.0, 1)
    points = np.linspace(0.0, 2.0, 17)

    assert np.max(np.abs(series(points) - points)) < 1e-15


def test_runge_function_is_resolved_at_degree_80() -> None:
    series = fit(lambda x: 1 / (1 + 25 * x**2), -1.0, 1.0, 80)
    dense = np.linspace(-1.0, 1.0, 1001)

    assert series.tail < 1e-6
    assert np.max(np.abs(series(dense) - 1 / (1 + 25 * dense**2))) < 1e-5


def test_eval_matches_function_at_nodes_and_inside() -> None:
    series = fit(np.sin, 0.0, 1.0, 30)

    assert series(0.0) == pytest.approx(0.0, abs=1e-13)
    assert series(0.3) == pytest.approx(math.sin(0.3), abs=1e-13)


def test_eval_refuses_points_beyond_padding() -> None:
    series = fit(np.sin, 0.0, 1.0, 30)

    assert series(1.04) == pytest.approx(math.sin(1.04), abs=1e-6)
    with pytest.raises(ExtrapolationError) as excinfo:
        series(np.array([0.5, 1.2]))
    assert excinfo.value.x == pytest.approx(1.2)


def test_eval_complex_of_polynomial_and_entire_function() -> None:
    square = fit(lambda x: x**2, -1.0, 1.0, 4)
    value, _ = square.eval_complex(1j)
    assert value == pytest.approx(-1.0, abs=1e-12)

    exponential = fit(np.exp, -1.0, 1.0, 30)
    value, error = exponential.eval_complex(0.5 + 0.5j)
    assert abs(value - np.exp(0.5 + 0.5j)) < 1e-10
    assert error < 1e-10
    assert abs(value - np.exp(0.5 + 0.5j)) <= error


def test_eval_complex_agrees_with_real_evaluation() -> None:
    series = fit(np.cos, -0.5, 1.5, 24)

    for x in (-0.5, 0.1, 0.77, 1.5):
        value, _ = series.eval_complex(complex(x))
        assert value.real == pytest.approx(float(series(x)), abs=1e-13)
        assert value.imag == pytest.approx(0.0, abs=1e-13)


def test_derivative_of_t2_and_of_constant() -> None:
    t2 = ChebSeries(-1.0, 1.0, np.array([0.0, 0.0, 1.0]))
    assert t2.derivative().coeffs == pytest.approx([0.0, 4.0])

    constant = ChebSeries(0.0, 3.0, np.array([2.5]))
    assert constant.derivative()(1.7) == 0.0


def test_derivative_matches_cosine_and_finite_differences() -> None:
    series = fit(np.sin, 0.0, 1.0, 30)
    slope = series.derivative()
    h = 1e-5
    central = (series(0.3 + h) - series(0.3 - h)) / (2 * h)

    assert slope(0.3) == pytest.approx(math.cos(0.3), abs=1e-10)
    assert slope(0.3) == pytest.approx(central, rel=1e-5)


def test_rescaled_by_negative_factor_flips_the_interval() -> None:
    series = fit(np.exp, 0.0, 1.0, 20)
    flipped = series.rescaled(-2.0)

    assert (flipped.lo, flipped.hi) == (-0.5, 0.0)
    assert flipped(-0.3) == pytest.approx(math.exp(0.6), rel=1e-13)


def test_compose_refit_affine_chain_is_exact() -> None:
    composed = compose_refit([lambda x: x + 1, lambda x: 2 * x], 0.0, 1.0, 3)
    points = np.linspace(0.0, 1.0, 11)

    assert np.max(np.abs(composed(points) - (2 * points + 2))) < 1e-14


def test_compose_refit_identity_and_nested_sine() -> None:
    identity = compose_refit([lambda x: x], -2.0, 3.0, 5)
    assert identity(1.25) == pytest.approx(1.25, abs=1e-14)

    nested = compose_refit([np.sin, np.sin], 0.0, 1.0, 40)
    assert nested(0.3) == pytest.approx(math.sin(math.sin(0.3)), abs=1e-12)


def test_compose_refit_reports_the_link_that_left_its_domain() -> None:
    inner = fit(np.sin, 0.0, 1.0, 10)

    with pytest.raises(CompositionDomainError) as excinfo:
        compose_refit([lambda x: x + 5, inner], 0.0, 1.0, 8)

    assert excinfo.value.link == 1


def test_decay_rate_of_geometric_coefficients() -> None:
    series = ChebSeries(-1.0, 1.0, 3.0 ** -np.arange(41.0))

    estimate = decay_rate(series)

    assert not estimate.sentinel
    assert estimate.rate == pytest.approx(3.0, abs=0.05)


def test_decay_rate_of_padded_polynomial_is_sentinel() -> None:
    coeffs = np.zeros(13)
    coeffs[:4] = [1.0, 0.5, 0.25, 0.125]

    estimate = decay_rate(ChebSeries(-1.0, 1.0, coeffs))

    assert estimate.sentinel
    assert math.isinf(estimate.rate)


def test_decay_rate_matches_pole_distance() -> None:
    series = fit(lambda x: 1 / (x - 2), -1.0, 1.0, 40)

    assert decay_rate(series).rate == pytest.approx(2 + math.sqrt(3), rel=0.05)


def test_fit_rejects_non_finite_samples_and_empty_intervals() -> None:
    with pytest.raises(FitError):
        fit(lambda x: np.full_like(x, np.nan), 0.0, 1.0, 4)
    with pytest.raises(DomainError):
        fit(np.sin, 1.0, 1.0, 4)


def test_chebyshev_points_are_ascending_with_exact_ends() -> None:
    points = chebyshev_points(-0.3, 0.7, 9)

    assert points[0] == -0.3
    assert points[-1] == 0.7
    assert np.all(np.diff(points) > 0)


def test_series_document_preserves_values() -> None:
    series = fit(np.exp, -0.25, 0.5, 16)

    restored = ChebSeries.from_dict(series.to_dict())

    assert np.array_equal(restored.coeffs, series.coeffs)
    assert (restored.lo, restored.hi) == (series.lo, series.hi)


def test_fit_is_linear_in_the_sampled_function() -> None:
    combined = fit(lambda x: 2.5 * np.sin(x) - 0.75 * np.exp(x), -0.5, 1.5, 24)
    parts = 2.5 * fit(np.sin, -0.5, 1.5, 24).coeffs - 0.75 * fit(np.exp, -0.5, 1.5, 24).coeffs

    assert np.max(np.abs(combined.coeffs - parts)) < 1e-13


def test_compose_refit_matches_pointwise_composition_at_random_points() -> None:
    inner = fit(np.sin, 0.0, 1.0, 30)
    outer = fit(np.exp, 0.0, 1.0, 30)
    composed = compose_refit([inner, outer], 0.0, 1.0, 40)
    probes = np.random.default_rng(19).uniform(0.0, 1.0, size=100)

    assert composed.resolved
    assert np.max(np.abs(composed(probes) - outer(inner(probes)))) < TAIL_TOLERANCE
