"""Exception types shared across the package."""

from __future__ import annotations


class RampSimError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(RampSimError, ValueError):
    """A physical or policy parameter is missing, ill-signed, or out of range."""


class ConfigurationError(RampSimError):
    """A scenario, schedule, or network is structurally unusable."""


class ContractViolation(RampSimError):
    """An operation was called outside its stated precondition."""


class CollisionError(RampSimError):
    """Two vehicles tried to occupy one slot, or a kinematic gap went negative.

    Unreachable under a verified conflict-free schedule; if it fires, the
    scenario (or this package) is broken, so it carries both vehicle ids.
    """

    def __init__(self, message: str, vehicle_ids: tuple[int, int] | None = None):
        super().__init__(message)
        self.vehicle_ids = vehicle_ids


class CyclicNetworkError(RampSimError):
    """A DAG-only analysis was asked to run on a cyclic network."""


class BracketError(RampSimError):
    """A bisection bracket does not straddle the stability boundary."""


class InsufficientTrips(RampSimError, ValueError):
    """Fewer completed trips than the requested averaging count."""
