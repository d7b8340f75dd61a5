"""Tests for precision profiles."""

from __future__ import annotations

import numpy as np
import pytest

from pair_renorm_lab.numerics import PROFILES, active_precision, configure_precision


def test_double_is_the_default_profile() -> None:
    profile = active_precision()

    assert profile.name == "double"
    assert profile.orbit_cap == 12
    assert profile.cf_depth_cap == 40
    assert isinstance(profile.real(np.float32(0.5)), float)


def test_extended_profile_is_selectable() -> None:
    profile = configure_precision("extended")

    assert active_precision() is profile
    assert profile.orbit_cap == 30
    assert profile.eps <= PROFILES["double"].eps
    assert profile.scaled(1e-12) <= 1e-12


def test_unknown_precision_is_rejected() -> None:
    with pytest.raises(ValueError, match="quad"):
        configure_precision("quad")
    assert active_precision().name == "double"
