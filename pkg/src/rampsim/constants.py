"""Vehicle and slot constants.

All quantities are kept as exact rationals so that derived values (the step
length tau and the slot spacing) carry no float error into schedule and bound
computations.  Floats are produced only at the edges, by the callers that
need them.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

from .errors import ParameterError

__all__ = ["SimConstants", "as_fraction", "derive_constants"]


def as_fraction(value, field: str) -> Fraction:
    """Convert ``value`` to an exact Fraction.

    Floats are read through their shortest decimal repr, so 0.2 becomes
    exactly 1/5 rather than the nearest binary float.
    """
    if isinstance(value, bool):
        raise ParameterError(f"{field}: expected a number, got bool")
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ParameterError(f"{field}: not a rational literal: {value!r}") from exc
    raise ParameterError(f"{field}: expected a number, got {type(value).__name__}")


@dataclass(frozen=True)
class SimConstants:
    """Physical constants of the vehicle fleet and the derived slot grid.

    h       reaction headway [s]
    S0      standstill gap [m]
    L       vehicle length [m]
    Vf      free-flow speed [m/s]
    a_min   hardest braking (negative) [m/s^2]
    a_max   hardest acceleration (positive) [m/s^2]

    tau = h + (S0 + L) / Vf is the time one slot takes to pass a point at
    free flow; slot_spacing = h * Vf + S0 + L = tau * Vf is the front-to-front
    distance between consecutive slots.
    """

    h: Fraction
    S0: Fraction
    L: Fraction
    Vf: Fraction
    a_min: Fraction
    a_max: Fraction
    tau: Fraction
    slot_spacing: Fraction

    def float_view(self) -> dict[str, float]:
        """All fields as floats, for numeric code paths."""
        return {
            "h": float(self.h),
            "S0": float(self.S0),
            "L": float(self.L),
            "Vf": float(self.Vf),
            "a_min": float(self.a_min),
            "a_max": float(self.a_max),
            "tau": float(self.tau),
            "slot_spacing": float(self.slot_spacing),
        }


def derive_constants(h, S0, L, Vf, a_min=-4, a_max=2) -> SimConstants:
    """Build SimConstants from raw parameters, exactly.

    Raises ParameterError naming the offending field when a parameter is
    nonpositive (h, S0, L, Vf), nonnegative (a_min), or nonpositive (a_max).
    """
    fh = as_fraction(h, "h")
    fS0 = as_fraction(S0, "S0")
    fL = as_fraction(L, "L")
    fVf = as_fraction(Vf, "Vf")
    fa_min = as_fraction(a_min, "a_min")
    fa_max = as_fraction(a_max, "a_max")

    for name, val in (("h", fh), ("S0", fS0), ("L", fL), ("Vf", fVf)):
        if val <= 0:
            raise ParameterError(f"{name} must be positive, got {val}")
    if fa_min >= 0:
        raise ParameterError(f"a_min must be negative, got {fa_min}")
    if fa_max <= 0:
        raise ParameterError(f"a_max must be positive, got {fa_max}")

    tau = fh + (fS0 + fL) / fVf
    spacing = fh * fVf + fS0 + fL
    return SimConstants(
        h=fh, S0=fS0, L=fL, Vf=fVf, a_min=fa_min, a_max=fa_max,
        tau=tau, slot_spacing=spacing,
    )
