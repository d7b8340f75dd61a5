"""Working-precision profile shared by the numerical modules.

Precision is a process-wide choice made once before any computation starts
(the CLI does it from ``--precision``). Tolerances quoted for binary64 are
rescaled by the unit roundoff of the active profile.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np

LOGGER = logging.getLogger(__name__)

PrecisionName = Literal["double", "extended"]

DOUBLE_EPS = float(np.finfo(np.float64).eps)


@dataclass(frozen=True)
class PrecisionProfile:
    """Numeric type plus the depth caps it can support."""

    name: PrecisionName
    dtype: type
    orbit_cap: int
    cf_depth_cap: int

    @property
    def eps(self) -> float:
        return float(np.finfo(self.dtype).eps)

    def scaled(self, tolerance: float) -> float:
        """Rescale a binary64 tolerance to this profile's unit roundoff."""

        return tolerance * self.eps / DOUBLE_EPS

    def real(self, value: object) -> object:
        """Cast ``value`` to the working scalar type."""

        if self.dtype is np.float64:
            return float(value)  # plain floats keep scalar loops fast
        return self.dtype(value)


PROFILES: dict[str, PrecisionProfile] = {
    "double": PrecisionProfile(name="double", dtype=np.float64, orbit_cap=12, cf_depth_cap=40),
    "extended": PrecisionProfile(name="extended", dtype=np.longdouble, orbit_cap=30, cf_depth_cap=60),
}

_active: PrecisionProfile = PROFILES["double"]


def configure_precision(name: str) -> PrecisionProfile:
    """Select the working precision for the rest of the process."""

    global _active
    try:
        profile = PROFILES[name]
    except KeyError:
        raise ValueError(f"Unknown precision '{name}' (expected one of {sorted(PROFILES)})") from None
    if profile.name == "extended" and np.finfo(np.longdouble).eps >= np.finfo(np.float64).eps:
        LOGGER.warning("longdouble is binary64 on this platform; extended runs use double arithmetic")
    _active = profile
    return profile


def active_precision() -> PrecisionProfile:
    return _active
