"""Metering policies: cycle-quota release control and an occupancy feedback
baseline.

The release policy works in synchronous cycles of ``T`` steps.  At each cycle
start every ramp's quota is frozen to its queue length; within the cycle a
ramp may release only at its scheduled steps (M1), while under quota (M2),
when the merge is safe (M3), and when the adaptive minimum gap since its last
release has elapsed (M4).  The checks run in that fixed order and the first
failing one names the hold reason.

The minimum gap g adapts on a slower grid: whenever the safety residual X_f
fails to decrease by gamma1 per period, g grows by an exponentially
increasing increment; while X_f decays fast enough, g shrinks by gamma2 and
eventually returns to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ContractViolation, ParameterError
from .schedule import ReleaseSchedule

__all__ = [
    "GapState",
    "gap_update",
    "LocalView",
    "Decision",
    "DrraState",
    "drra_begin_cycle",
    "drra_decide",
    "drra_note_release",
    "AlineaState",
    "alinea_update",
    "alinea_accrue",
]

# tolerance for the gap test: t and g are float seconds
_GAP_EPS = 1e-9


@dataclass(frozen=True)
class GapState:
    """Adaptive minimum-gap controller state.

    g [s] is the current minimum release gap, theta [s] the next increment,
    xf_prev the safety residual at the previous update.
    """

    g: float
    theta: float
    xf_prev: float
    T_per_s: float
    gamma1: float
    gamma2: float
    theta0: float
    beta: float

    @staticmethod
    def initial(xf0: float, T_per_s: float, gamma1: float = 50.0,
                gamma2: float = 10.0, theta0: float = 0.1,
                beta: float = 1.01) -> "GapState":
        for name, val in (("T_per_s", T_per_s), ("gamma1", gamma1),
                          ("gamma2", gamma2), ("theta0", theta0)):
            if val <= 0:
                raise ParameterError(f"{name} must be positive, got {val}")
        if beta < 1:
            raise ParameterError(f"beta must be >= 1, got {beta}")
        if xf0 < 0 or not math.isfinite(xf0):
            raise ContractViolation(f"X_f must be finite and >= 0, got {xf0}")
        return GapState(g=0.0, theta=theta0, xf_prev=xf0, T_per_s=T_per_s,
                        gamma1=gamma1, gamma2=gamma2, theta0=theta0, beta=beta)


def gap_update(state: GapState, xf_now: float) -> GapState:
    """Advance the gap controller by one period given the current residual."""
    if xf_now < 0 or not math.isfinite(xf_now):
        raise ContractViolation(f"X_f must be finite and >= 0, got {xf_now}")
    if xf_now <= max(state.xf_prev - state.gamma1, 0.0):
        return replace(state, g=max(state.g - state.gamma2, 0.0), xf_prev=xf_now)
    theta = state.beta * state.theta
    return replace(state, g=state.g + theta, theta=theta, xf_prev=xf_now)


@dataclass(frozen=True)
class LocalView:
    """What a ramp can see when deciding a release."""

    step: int
    queue_len: int
    safe_to_release: bool
    head_merge_free: bool = False


@dataclass(frozen=True)
class Decision:
    release: bool
    reason: str | None  # None on release, else queue | M1 | M2 | M3 | M4

    def __bool__(self) -> bool:
        return self.release


_HOLD_QUEUE = Decision(False, "queue")
_HOLD_M1 = Decision(False, "M1")
_HOLD_M2 = Decision(False, "M2")
_HOLD_M3 = Decision(False, "M3")
_HOLD_M4 = Decision(False, "M4")
_GO = Decision(True, None)


@dataclass(frozen=True)
class DrraState:
    """Cycle-synchronous release state shared by all ramps."""

    T: int
    non_reactive: bool
    cycle_index: int
    quota: dict[str, int]
    released: dict[str, int]
    last_release_t: dict[str, float]
    gap: GapState | None = None

    @staticmethod
    def initial(ramps, T: int, non_reactive: bool = False,
                gap: GapState | None = None) -> "DrraState":
        if T < 1:
            raise ParameterError(f"cycle length T must be >= 1, got {T}")
        return DrraState(
            T=T, non_reactive=non_reactive, cycle_index=-1,
            quota={r: 0 for r in ramps}, released={r: 0 for r in ramps},
            last_release_t={r: -math.inf for r in ramps}, gap=gap,
        )

    @property
    def min_gap_s(self) -> float:
        return self.gap.g if self.gap is not None else 0.0


def drra_begin_cycle(state: DrraState, queues: dict[str, int], step: int) -> DrraState:
    """Freeze quotas from current queue lengths at a cycle boundary."""
    if step % state.T != 0:
        raise ContractViolation(f"step {step} is not a multiple of T={state.T}")
    return replace(
        state,
        cycle_index=step // state.T,
        quota={r: queues[r] for r in state.quota},
        released={r: 0 for r in state.released},
    )


def drra_decide(ramp: str, t_s: float, state: DrraState,
                schedule: ReleaseSchedule, view: LocalView) -> Decision:
    """Evaluate the release checks in order; first failure is the reason."""
    if view.queue_len < 1:
        return _HOLD_QUEUE
    if state.non_reactive and view.head_merge_free:
        pass  # M1 waived: this vehicle cannot meet any other stream
    elif not schedule[ramp].allows(view.step):
        return _HOLD_M1
    if state.released[ramp] >= state.quota[ramp]:
        return _HOLD_M2
    if not view.safe_to_release:
        return _HOLD_M3
    if t_s - state.last_release_t[ramp] < state.min_gap_s - _GAP_EPS:
        return _HOLD_M4
    return _GO


def drra_note_release(state: DrraState, ramp: str, t_s: float) -> DrraState:
    """Record an actual release; enforces the quota as a hard invariant."""
    if state.released[ramp] >= state.quota[ramp]:
        raise ContractViolation(f"release beyond quota at ramp {ramp!r}")
    released = dict(state.released)
    released[ramp] += 1
    last = dict(state.last_release_t)
    last[ramp] = t_s
    return replace(state, released=released, last_release_t=last)


@dataclass(frozen=True)
class AlineaState:
    """Occupancy-feedback metering rate with a release credit bucket.

    rate is in vehicles per hour; credit accumulates at that rate and one
    vehicle may be admitted whenever a full credit is available.
    """

    rate_veh_h: float
    K_r: float
    target_occ_pct: float
    rate_min: float
    rate_max: float
    credit: float
    credit_cap: float

    @staticmethod
    def initial(rate0: float = 900.0, K_r: float = 70.0,
                target_occ_pct: float = 13.0, rate_min: float = 0.0,
                rate_max: float = 1800.0, credit_cap: float = 2.0) -> "AlineaState":
        if K_r <= 0:
            raise ParameterError(f"K_r must be positive, got {K_r}")
        if not 0 < target_occ_pct < 100:
            raise ParameterError(f"target occupancy must be in (0, 100), got {target_occ_pct}")
        if not rate_min <= rate0 <= rate_max:
            raise ParameterError(f"rate0={rate0} outside [{rate_min}, {rate_max}]")
        if credit_cap < 1:
            raise ParameterError(f"credit_cap must be >= 1, got {credit_cap}")
        return AlineaState(rate_veh_h=rate0, K_r=K_r, target_occ_pct=target_occ_pct,
                           rate_min=rate_min, rate_max=rate_max, credit=0.0,
                           credit_cap=credit_cap)


def alinea_update(state: AlineaState, occ_pct: float) -> AlineaState:
    """One feedback update from the measured occupancy over the last period."""
    if not 0.0 <= occ_pct <= 100.0:
        raise ContractViolation(f"occupancy must be in [0, 100], got {occ_pct}")
    rate = state.rate_veh_h + state.K_r * (state.target_occ_pct - occ_pct)
    rate = min(max(rate, state.rate_min), state.rate_max)
    return replace(state, rate_veh_h=rate)


def alinea_accrue(state: AlineaState, dt_s: float) -> AlineaState:
    credit = min(state.credit + state.rate_veh_h * dt_s / 3600.0, state.credit_cap)
    return replace(state, credit=credit)
