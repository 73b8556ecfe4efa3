"""Throughput bounds, stability diagnostics, and travel-time summaries.

The two analytical bounds bracket the stable demand region when all ramps'
arrival probabilities are scaled by a common factor: the inner (sufficient)
bound is the worst ratio of a ramp's scheduled release rate to its node's
unit load coefficient; the outer (necessary) bound caps the busiest mainline
node at one crossing per step.  Both are exact rationals.

Stability itself is certified empirically by bisecting on the demand scale
and testing whether total queue length drifts upward, and diagnosed via a
quadratic function of ramp degrees whose index sets come from an upstream
replacement recursion: starting from {i}, repeatedly replace any member by
its immediate upstream ramp set, dropping sets seen at the previous level.
On acyclic networks the recursion reaches the empty set and stops.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .demand import DemandSpec, induced_load
from .errors import (
    BracketError,
    ConfigurationError,
    CyclicNetworkError,
    InsufficientTrips,
    ParameterError,
)
from .network import Network
from .schedule import ReleaseSchedule

__all__ = [
    "inner_bound",
    "outer_bound",
    "enumerate_U",
    "family_union",
    "degree_bound",
    "node_degrees",
    "DriftStats",
    "lyapunov_drift",
    "BoundaryEstimate",
    "estimate_boundary",
    "queue_slope",
    "ttt",
    "ttt_series",
]

# one-sided 95% Student t critical values by degrees of freedom
_T95 = {1: 6.314, 2: 2.920, 3: 2.353, 4: 2.132, 5: 2.015, 6: 1.943, 7: 1.895,
        8: 1.860, 9: 1.833, 10: 1.812, 11: 1.796, 12: 1.782, 13: 1.771,
        14: 1.761, 15: 1.753, 16: 1.746, 17: 1.740, 18: 1.734, 19: 1.729,
        20: 1.725, 25: 1.708, 30: 1.697}


def _t95(df: int) -> float:
    if df < 1:
        raise ParameterError("need at least two samples for a confidence bound")
    if df in _T95:
        return _T95[df]
    for k in sorted(_T95, reverse=True):
        if df > k:
            return _T95[k]
    return _T95[1]


def _unit_loads(network: Network, demand: DemandSpec) -> dict[str, Fraction]:
    """Per-node load coefficients at unit arrival probability everywhere."""
    return induced_load(network, demand.scaled(1)).rho


def inner_bound(network: Network, demand: DemandSpec,
                schedule: ReleaseSchedule) -> Fraction:
    """Largest demand scale the schedule provably serves, exact."""
    loads = _unit_loads(network, demand)
    best: Fraction | None = None
    for r in network.ramps:
        c = loads[network.ramp_node[r]]
        if c == 0:
            continue
        ratio = schedule[r].rate / c
        if best is None or ratio < best:
            best = ratio
    if best is None:
        raise ConfigurationError("no ramp carries load; bound undefined")
    return min(best, Fraction(1))


def outer_bound(network: Network, demand: DemandSpec) -> Fraction:
    """Demand scale at which the busiest node saturates, exact."""
    loads = _unit_loads(network, demand)
    peak = max(loads.values())
    if peak == 0:
        raise ConfigurationError("no node carries load; bound undefined")
    return min(Fraction(1) / peak, Fraction(1))


def enumerate_U(network: Network, ramp: str,
                max_levels: int | None = None,
                max_sets: int = 100_000) -> list[set[tuple[str, ...]]]:
    """Levels of the upstream replacement recursion for ``ramp``.

    Level 0 is {{ramp}}; level k+1 replaces each member of each level-k
    multiset by either itself or its immediate upstream ramp set, in every
    combination, dropping results already present at level k.  Multisets are
    returned as sorted tuples.  Stops at the first empty level.
    """
    if ramp not in network.ramps:
        raise ConfigurationError(f"unknown ramp {ramp!r}")
    if not network.acyclic:
        raise CyclicNetworkError(
            "the replacement recursion needs an acyclic mainline"
        )
    pred = {r: network.upstream_ramps(r) for r in network.ramps}
    levels: list[set[tuple[str, ...]]] = [{(ramp,)}]
    total = 1
    while True:
        prev = levels[-1]
        nxt: set[tuple[str, ...]] = set()
        for I in prev:
            options = [((j,), pred[j]) for j in I]
            for choice in itertools.product(*options):
                merged = tuple(sorted(itertools.chain.from_iterable(choice)))
                if merged not in prev:
                    nxt.add(merged)
        if not nxt:
            return levels
        total += len(nxt)
        if total > max_sets:
            raise ConfigurationError(
                f"replacement recursion exceeded {max_sets} sets"
            )
        levels.append(nxt)
        if max_levels is not None and len(levels) > max_levels:
            return levels


def family_union(levels) -> set[tuple[str, ...]]:
    out: set[tuple[str, ...]] = set()
    for lv in levels:
        out |= lv
    return out


def degree_bound(degrees: dict[str, int], family) -> int:
    """max over index multisets of the multiplicity-weighted degree sum."""
    best = 0
    for I in family:
        s = sum(degrees[j] for j in I)
        if s > best:
            best = s
    return best


def node_degrees(sim) -> dict[str, int]:
    """Vehicles per ramp whose remaining route still crosses that ramp's node."""
    return sim.degree_snapshot()


@dataclass
class DriftStats:
    """Conditional one-step drift of V = D^2 above a level threshold."""

    threshold: float
    n_samples: int
    seeds_used: int
    per_seed_means: list[float]
    mean: float | None
    upper95: float | None
    lower95: float | None


def lyapunov_drift(samples_by_seed, family, *, quantile: float = 0.9,
                   threshold: float | None = None) -> DriftStats:
    """Drift statistics of the squared degree bound across seeds.

    ``samples_by_seed`` is a list (one entry per seed) of degree-sample
    lists as produced by the slot simulator's degree sampling: (step,
    {ramp: degree}).  The threshold defaults to the pooled ``quantile`` of
    V; only transitions starting above it are averaged.
    """
    v_by_seed = []
    for samples in samples_by_seed:
        v = np.array([degree_bound(d, family) for _, d in samples], dtype=float) ** 2
        v_by_seed.append(v)
    if threshold is None:
        chunks = [v[:-1] for v in v_by_seed if len(v) > 1]
        if not chunks:
            raise ParameterError("no transitions to analyze")
        threshold = float(np.quantile(np.concatenate(chunks), quantile))
    per_seed_means = []
    n_total = 0
    for v in v_by_seed:
        if len(v) < 2:
            continue
        dv = np.diff(v)
        mask = v[:-1] > threshold
        if mask.any():
            per_seed_means.append(float(dv[mask].mean()))
            n_total += int(mask.sum())
    m = len(per_seed_means)
    if m == 0:
        return DriftStats(threshold, 0, 0, [], None, None, None)
    mean = float(np.mean(per_seed_means))
    if m == 1:
        return DriftStats(threshold, n_total, 1, per_seed_means, mean, None, None)
    se = float(np.std(per_seed_means, ddof=1)) / math.sqrt(m)
    t = _t95(m - 1)
    return DriftStats(threshold, n_total, m, per_seed_means,
                      mean, mean + t * se, mean - t * se)


def queue_slope(queue_total: np.ndarray, tail_fraction: float = 0.5) -> float:
    """Least-squares slope of the trailing part of a queue series, veh/step."""
    n = len(queue_total)
    if n < 4:
        raise ParameterError("queue series too short for a slope")
    start = int(n * (1.0 - tail_fraction))
    y = np.asarray(queue_total[start:], dtype=float)
    x = np.arange(len(y), dtype=float)
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class BoundaryEstimate:
    lambda_star: float
    lo: float
    hi: float
    evaluations: list[tuple[float, bool, list[float]]]  # (lam, stable, slopes)


def estimate_boundary(scenario, lam_lo: float, lam_hi: float, *,
                      seeds=range(8), horizon: int = 200_000,
                      resolution: float = 0.01, slope_eps: float = 1e-3,
                      runner=None, progress=None) -> BoundaryEstimate:
    """Bisect the demand scale for the stability boundary of a scenario.

    A demand level is stable when a majority of seeds show trailing queue
    slope at most ``slope_eps``.  ``lam_lo`` must test stable and ``lam_hi``
    saturated, otherwise a BracketError reports the measured slopes.
    ``runner(scenario, lam, seed, horizon)`` may override how one run's
    queue series is produced (used by tests).
    """
    if not 0 <= lam_lo < lam_hi <= 1:
        raise BracketError(f"bad bracket [{lam_lo}, {lam_hi}]")
    seeds = list(seeds)
    if runner is None:
        from . import slotsim

        def runner(scn, lam, seed, hor):
            trace, _ = slotsim.run(
                scn.with_lambda(lam), hor, seed,
                per_ramp_trace=False, log_vehicles=False,
            )
            return trace.queue_total

    evaluations = []

    def stable(lam: float) -> bool:
        slopes = [queue_slope(runner(scenario, lam, s, horizon)) for s in seeds]
        ok = sum(sl <= slope_eps for sl in slopes) * 2 > len(seeds)
        evaluations.append((lam, ok, slopes))
        if progress is not None:
            progress(lam, ok, slopes)
        return ok

    if not stable(lam_lo):
        raise BracketError(
            f"lower bracket {lam_lo} is not stable: slopes {evaluations[-1][2]}"
        )
    if stable(lam_hi):
        raise BracketError(
            f"upper bracket {lam_hi} is not saturated: slopes {evaluations[-1][2]}"
        )
    lo, hi = lam_lo, lam_hi
    while hi - lo > resolution:
        mid = round(0.5 * (lo + hi), 6)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return BoundaryEstimate(
        lambda_star=0.5 * (lo + hi), lo=lo, hi=hi, evaluations=evaluations
    )


def _trips(logs, tau_s):
    """(exit_time_s, duration_s) per completed non-preloaded trip."""
    out = []
    for lg in logs:
        if hasattr(lg, "exit_step"):
            if lg.arrive_step is None or lg.exit_step is None:
                continue
            if tau_s is None:
                raise ParameterError("step-based logs need tau_s")
            out.append((lg.exit_step * tau_s, (lg.exit_step - lg.arrive_step) * tau_s))
        else:
            if lg.arrive_s is None or lg.exit_s is None:
                continue
            out.append((lg.exit_s, lg.exit_s - lg.arrive_s))
    out.sort()
    return out


def ttt(logs, n: int, tau_s: float | None = None) -> float:
    """Mean door-to-door time in seconds of the first n completed trips."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    trips = _trips(logs, tau_s)
    if len(trips) < n:
        raise InsufficientTrips(f"only {len(trips)} completed trips, need {n}")
    return sum(d for _, d in trips[:n]) / n


def ttt_series(logs, tau_s: float | None = None):
    """Running mean travel time: (exit_times_s, mean_ttt_s) arrays."""
    trips = _trips(logs, tau_s)
    if not trips:
        raise InsufficientTrips("no completed trips")
    t = np.array([e for e, _ in trips])
    d = np.array([dur for _, dur in trips])
    return t, np.cumsum(d) / np.arange(1, len(d) + 1)
