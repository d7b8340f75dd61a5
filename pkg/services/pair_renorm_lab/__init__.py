"""Renormalization of critical commuting pairs: tuning, extraction, orbits and experiments."""

from . import executor  # re-export for tests and downstream modules

__version__ = "0.1.0"

__all__ = ["__version__", "executor"]
