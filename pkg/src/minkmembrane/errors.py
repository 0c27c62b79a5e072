"""Exception types shared across the package."""

from __future__ import annotations


class MinkMembraneError(Exception):
    """Base class for all package errors."""


class ConfigError(MinkMembraneError):
    """Invalid or unparseable run configuration."""


class CorruptFieldError(MinkMembraneError):
    """A field contains NaN or Inf values."""


class FixtureError(MinkMembraneError):
    """A committed fixture file is missing or malformed."""


class InsufficientHistoryError(MinkMembraneError):
    """An operation needs more stored time slices than are available."""


class DegeneracyError(MinkMembraneError):
    """Geometric degeneracy: light-cone proximity or a vanishing denominator."""


class OnOrOutsideConeError(MinkMembraneError):
    """A point left the interior of the forward light cone (rho <= 0)."""


class NonHyperbolicError(MinkMembraneError):
    """The quasilinear operator lost hyperbolicity (Q00 too close to 1).

    Carries the offending node, its Q00 value and, when raised during
    evolution, the simulation time.
    """

    def __init__(self, message: str, *, node: int | None = None,
                 q_value: float | None = None, time: float | None = None):
        super().__init__(message)
        self.node = node
        self.q_value = q_value
        self.time = time
