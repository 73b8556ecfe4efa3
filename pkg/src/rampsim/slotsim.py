"""Slot-based discrete-time traffic simulator.

Time advances in steps of tau; each mainline segment is a chain of slots and
holds at most one vehicle per slot.  All mainline vehicles advance one slot
per step, so a segment of ``slot_count`` c takes exactly c steps to cross and
a segment's occupancy is fully determined by the entry step of each vehicle:
a vehicle that entered during step e sits in slot (s - e + 1) at the end of
step s and leaves during step e + c.  The tail slot of a segment is occupied
at step s exactly when some vehicle entered at step s, which makes the merge
safety check O(1).

Step order: (i) synchronous advance, (ii) exits, (iii) cycle-quota freeze
when due, then arrivals, (iv) release decisions in ramp id order.  Two
vehicles entering one slot in the same step is a collision and raises; under
a verified conflict-free schedule this cannot happen.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import SimConstants
from .errors import CollisionError, ConfigurationError
from .network import Network, route_contains_merge
from .policy import (
    AlineaState,
    DrraState,
    LocalView,
    alinea_accrue,
    alinea_update,
    drra_begin_cycle,
    drra_decide,
    drra_note_release,
)

__all__ = ["VehicleLog", "Trace", "Metrics", "SlotSim", "run", "crossing_rate"]


@dataclass(slots=True)
class VehicleLog:
    """Lifecycle of one vehicle, in slot steps.

    Preloaded vehicles (placed on the road at time zero) have no arrival or
    release step and are excluded from travel-time averages.
    """

    vid: int
    ramp: str | None
    route: str
    arrive_step: int | None
    release_step: int | None = None
    exit_step: int | None = None


@dataclass
class Trace:
    """Per-step observables.  Row s is the state after step s (row 0 is the
    initial state), so arrays have ``steps + 1`` rows."""

    steps: int
    tau_s: float
    ramps: tuple[str, ...]
    queue_total: np.ndarray
    queue_per_ramp: np.ndarray | None
    logs: list[VehicleLog] | None
    degree_samples: list[tuple[int, dict[str, int]]] | None
    probe_counts: dict[str, int]


@dataclass
class Metrics:
    horizon: int
    seed: int | None
    arrivals: dict[str, int]
    releases: dict[str, int]
    exits: int
    final_queue: dict[str, int]
    hold_reasons: dict[str, dict[str, int]] = field(default_factory=dict)


class _Segment:
    __slots__ = ("slot_count", "veh", "last_entry", "last_vid")

    def __init__(self, slot_count: int):
        self.slot_count = slot_count
        # entries (vid, route_id, leg_idx, entry_step), oldest first
        self.veh: deque = deque()
        self.last_entry = -1
        self.last_vid = -1


class SlotSim:
    """One simulation run.  Build it, call ``run_steps``, read trace/metrics.

    ``policy_cfg`` is duck-typed: it needs ``kind`` ("drra" or "safe_alinea")
    plus the fields of that policy (see scenario.PolicyConfig).
    """

    def __init__(self, network: Network, constants: SimConstants, sampler,
                 policy_cfg, *, horizon: int, preload=(),
                 per_ramp_trace: bool = True, log_vehicles: bool = True,
                 degree_interval: int | None = None, probes=(),
                 observer=None):
        self.network = network
        self.constants = constants
        self.sampler = sampler
        self.policy_cfg = policy_cfg
        self.tau_s = float(constants.tau)
        self.observer = observer

        self.segments: dict[str, _Segment] = {}
        for e in network.edges.values():
            if e.kind == "segment":
                if e.slot_count is None or e.slot_count < 1:
                    raise ConfigurationError(f"segment {e.id!r} has no slot_count")
                self.segments[e.id] = _Segment(e.slot_count)
        self._seg_ids = sorted(self.segments)

        self.ramps = tuple(network.ramps)
        self._ramp_index = {r: i for i, r in enumerate(self.ramps)}
        self.queues: dict[str, deque] = {r: deque() for r in self.ramps}

        self.route_legs = {rid: network.route_legs(rid) for rid in network.routes}
        for rid, legs in self.route_legs.items():
            if not legs:
                raise ConfigurationError(f"route {rid!r} has no mainline segment")
        self._merge_free = {
            rid: not route_contains_merge(network, rid) for rid in network.routes
        }

        # suffix masks of ramp-node bits still ahead of a vehicle on leg i
        ramp_bit = {network.ramp_node[r]: 1 << i for i, r in enumerate(self.ramps)}
        self._seg_masks: dict[str, list[int]] = {}
        self._queued_mask: dict[str, int] = {}
        for rid, legs in self.route_legs.items():
            masks = [0] * len(legs)
            acc = 0
            for i in range(len(legs) - 1, -1, -1):
                acc |= ramp_bit.get(network.edges[legs[i]].head, 0)
                masks[i] = acc
            self._seg_masks[rid] = masks
            own = ramp_bit.get(network.ramp_node[network.route_ramp(rid)], 0)
            self._queued_mask[rid] = masks[0] | own
        self._deg = [0] * len(self.ramps)

        self.kind = policy_cfg.kind
        if self.kind == "drra":
            if policy_cfg.schedule is None:
                raise ConfigurationError("drra policy needs a release schedule")
            self.sched = policy_cfg.schedule
            for r in self.ramps:
                self.sched[r]  # raises on missing entry
            self.drra = DrraState.initial(
                self.ramps, policy_cfg.T, non_reactive=policy_cfg.non_reactive,
                gap=None,
            )
            self.quota_after_arrivals = bool(
                getattr(policy_cfg, "quota_includes_boundary_arrivals", False)
            )
        elif self.kind == "safe_alinea":
            bad = [n.id for n in network.nodes.values() if n.kind == "merge_node"]
            if bad:
                raise ConfigurationError(
                    "safe_alinea on the slot backend needs a merge-free network; "
                    f"found merge nodes {bad}"
                )
            self.alinea = {
                r: AlineaState.initial(
                    rate0=policy_cfg.alinea_rate0, K_r=policy_cfg.alinea_K_r,
                    target_occ_pct=policy_cfg.alinea_target_occ_pct,
                    rate_min=policy_cfg.alinea_rate_min,
                    rate_max=policy_cfg.alinea_rate_max,
                    credit_cap=policy_cfg.alinea_credit_cap,
                ) for r in self.ramps
            }
            self._period_steps = max(1, round(policy_cfg.alinea_period_s / self.tau_s))
            spacing = float(constants.slot_spacing)
            self._zone: dict[str, tuple[str, int]] = {}
            for r in self.ramps:
                out_seg = self.route_legs[network.routes_from(r)[0]][0]
                z = max(1, round(policy_cfg.alinea_detector_zone_m / spacing))
                self._zone[r] = (out_seg, min(z, self.segments[out_seg].slot_count))
            self._occ_acc = {r: 0.0 for r in self.ramps}
            self._occ_scale = 100.0 * float(constants.L) / spacing
        else:
            raise ConfigurationError(f"unknown policy kind {policy_cfg.kind!r}")

        self.horizon = horizon
        self.s = 0  # completed steps
        self._next_vid = 0
        self.logs: list[VehicleLog] | None = [] if log_vehicles else None
        self.exits = 0
        self.arrivals = {r: 0 for r in self.ramps}
        self.releases = {r: 0 for r in self.ramps}
        self.hold_reasons = {r: {} for r in self.ramps}
        self.probe_counts = {p: 0 for p in probes}
        self._probe_set = set(probes)

        self.queue_total = np.zeros(horizon + 1, dtype=np.int64)
        self.queue_per_ramp = (
            np.zeros((horizon + 1, len(self.ramps)), dtype=np.int32)
            if per_ramp_trace else None
        )
        self.degree_interval = degree_interval
        self.degree_samples: list[tuple[int, dict[str, int]]] | None = (
            [] if degree_interval else None
        )

        for spec in preload:
            self._place_preload(*spec)
        if self.kind == "drra":
            self.drra = drra_begin_cycle(
                self.drra, {r: len(self.queues[r]) for r in self.ramps}, 0
            )
        self._record(0)

    # -- construction helpers -------------------------------------------------

    def _place_preload(self, edge: str, cell: int, route: str) -> None:
        seg = self.segments.get(edge)
        if seg is None:
            raise ConfigurationError(f"preload edge {edge!r} is not a segment")
        if not 1 <= cell <= seg.slot_count:
            raise ConfigurationError(
                f"preload cell {cell} outside [1..{seg.slot_count}] on {edge!r}"
            )
        legs = self.route_legs.get(route)
        if legs is None or edge not in legs:
            raise ConfigurationError(f"preload route {route!r} does not use edge {edge!r}")
        li = legs.index(edge)
        vid = self._next_vid
        self._next_vid += 1
        entry = 1 - cell
        rec = (vid, route, li, entry)
        placed = False
        for k, other in enumerate(seg.veh):
            if other[3] == entry:
                raise ConfigurationError(f"two preloads in cell {cell} of {edge!r}")
            if other[3] > entry:
                seg.veh.insert(k, rec)
                placed = True
                break
        if not placed:
            seg.veh.append(rec)
        seg.last_entry = max(seg.last_entry, entry)
        self._deg_apply(self._seg_masks[route][li], +1)
        if self.logs is not None:
            self.logs.append(VehicleLog(vid, None, route, None, None, None))

    # -- degree counters -------------------------------------------------------

    def _deg_apply(self, mask: int, delta: int) -> None:
        while mask:
            low = mask & -mask
            self._deg[low.bit_length() - 1] += delta
            mask ^= low

    def degree_snapshot(self) -> dict[str, int]:
        """Vehicles whose remaining route still crosses each ramp's node."""
        return {r: self._deg[i] for i, r in enumerate(self.ramps)}

    # -- stepping --------------------------------------------------------------

    def run_steps(self, n: int | None = None) -> None:
        end = self.horizon if n is None else min(self.s + n, self.horizon)
        while self.s < end:
            self._step()

    def _step(self) -> None:
        s = self.s + 1

        # (i) advance + (ii) exits: pop every vehicle due out this step
        movers = []
        for eid in self._seg_ids:
            seg = self.segments[eid]
            if seg.veh and seg.veh[0][3] + seg.slot_count == s:
                movers.append(seg.veh.popleft())
        for vid, rid, li, _ in movers:
            legs = self.route_legs[rid]
            if li + 1 < len(legs):
                self._enter(legs[li + 1], vid, rid, li + 1, s)
                self._deg_apply(
                    self._seg_masks[rid][li] ^ self._seg_masks[rid][li + 1], -1
                )
            else:
                self.exits += 1
                self._deg_apply(self._seg_masks[rid][li], -1)
                if self.logs is not None:
                    self.logs[vid].exit_step = s

        drra = self.kind == "drra"

        # (iii) quota freeze, then arrivals (or swapped, behind the flag)
        if drra and not self.quota_after_arrivals and s % self.drra.T == 0:
            self._freeze(s)
        for r in self.ramps:
            rid = self.sampler.poll(r, s)
            if rid is not None:
                vid = self._next_vid
                self._next_vid += 1
                self.queues[r].append((vid, rid))
                self.arrivals[r] += 1
                self._deg_apply(self._queued_mask[rid], +1)
                if self.logs is not None:
                    self.logs.append(VehicleLog(vid, r, rid, s))
        if drra and self.quota_after_arrivals and s % self.drra.T == 0:
            self._freeze(s)

        # (iv) releases, ramp id order
        if drra:
            tau = self.tau_s
            for r in self.ramps:
                q = self.queues[r]
                if not q:
                    continue
                head_route = q[0][1]
                tail = self.segments[self.route_legs[head_route][0]]
                view = LocalView(
                    step=s, queue_len=len(q),
                    safe_to_release=tail.last_entry != s,
                    head_merge_free=self._merge_free[head_route],
                )
                d = drra_decide(r, s * tau, self.drra, self.sched, view)
                if d.release:
                    self._release(r, s)
                    self.drra = drra_note_release(self.drra, r, s * tau)
                else:
                    hr = self.hold_reasons[r]
                    hr[d.reason] = hr.get(d.reason, 0) + 1
        else:
            self._alinea_step(s)

        self.s = s
        self._record(s)
        if self.observer is not None:
            self.observer(self, s)

    def _freeze(self, s: int) -> None:
        self.drra = drra_begin_cycle(
            self.drra, {r: len(self.queues[r]) for r in self.ramps}, s
        )

    def _enter(self, eid: str, vid: int, rid: str, li: int, s: int) -> None:
        seg = self.segments[eid]
        if seg.last_entry == s:
            raise CollisionError(
                f"slot collision on {eid!r} at step {s}", (seg.last_vid, vid)
            )
        seg.veh.append((vid, rid, li, s))
        seg.last_entry = s
        seg.last_vid = vid
        if eid in self._probe_set:
            self.probe_counts[eid] += 1

    def _release(self, r: str, s: int) -> None:
        vid, rid = self.queues[r].popleft()
        self._enter(self.route_legs[rid][0], vid, rid, 0, s)
        self._deg_apply(self._queued_mask[rid] ^ self._seg_masks[rid][0], -1)
        self.releases[r] += 1
        if self.logs is not None:
            self.logs[vid].release_step = s

    def _alinea_step(self, s: int) -> None:
        if s % self._period_steps == 0:
            f = self._occ_scale / self._period_steps
            for r in self.ramps:
                self.alinea[r] = alinea_update(self.alinea[r], self._occ_acc[r] * f)
                self._occ_acc[r] = 0.0
        for r in self.ramps:
            st = alinea_accrue(self.alinea[r], self.tau_s)
            q = self.queues[r]
            if q:
                if st.credit >= 1.0 - 1e-9:
                    tail = self.segments[self.route_legs[q[0][1]][0]]
                    if tail.last_entry != s:
                        self._release(r, s)
                        st = replace(st, credit=st.credit - 1.0)
                    else:
                        hr = self.hold_reasons[r]
                        hr["M3"] = hr.get("M3", 0) + 1
                else:
                    hr = self.hold_reasons[r]
                    hr["credit"] = hr.get("credit", 0) + 1
            self.alinea[r] = st
            # space occupancy of the detector zone, sampled end-of-step
            zone_edge, z = self._zone[r]
            seg = self.segments[zone_edge]
            lo = s + 1 - z
            occ = 0
            for rec in reversed(seg.veh):
                if rec[3] >= lo:
                    occ += 1
                else:
                    break
            self._occ_acc[r] += occ / z

    def _record(self, s: int) -> None:
        total = 0
        for i, r in enumerate(self.ramps):
            n = len(self.queues[r])
            total += n
            if self.queue_per_ramp is not None:
                self.queue_per_ramp[s, i] = n
        self.queue_total[s] = total
        if self.degree_samples is not None and s % self.degree_interval == 0:
            self.degree_samples.append((s, self.degree_snapshot()))

    # -- inspection -------------------------------------------------------------

    def occupancy(self, edge: str) -> list[int | None]:
        """Vehicle id per slot of ``edge`` (index 0 = tail slot), right now."""
        seg = self.segments[edge]
        cells: list[int | None] = [None] * seg.slot_count
        for vid, _, _, entry in seg.veh:
            k = self.s - entry + 1
            if not 1 <= k <= seg.slot_count:
                raise AssertionError(f"vehicle {vid} off-grid on {edge!r}")
            cells[k - 1] = vid
        return cells

    def vehicles_on_road(self) -> int:
        return sum(len(seg.veh) for seg in self.segments.values())

    def trace(self) -> Trace:
        return Trace(
            steps=self.s, tau_s=self.tau_s, ramps=self.ramps,
            queue_total=self.queue_total[: self.s + 1],
            queue_per_ramp=(
                self.queue_per_ramp[: self.s + 1]
                if self.queue_per_ramp is not None else None
            ),
            logs=self.logs, degree_samples=self.degree_samples,
            probe_counts=dict(self.probe_counts),
        )

    def metrics(self, seed: int | None = None) -> Metrics:
        return Metrics(
            horizon=self.s, seed=seed,
            arrivals=dict(self.arrivals), releases=dict(self.releases),
            exits=self.exits,
            final_queue={r: len(self.queues[r]) for r in self.ramps},
            hold_reasons={r: dict(v) for r, v in self.hold_reasons.items()},
        )


def run(scenario, horizon: int, seed: int, **options) -> tuple[Trace, Metrics]:
    """Run a scenario on the slot backend.

    ``scenario`` provides network, constants, demand spec, policy config and
    optional preload; ``options`` are passed to SlotSim.
    """
    from .demand import BernoulliDemand

    sampler = options.pop("sampler", None)
    if sampler is None:
        sampler = BernoulliDemand(scenario.network, scenario.demand, seed)
    sim = SlotSim(
        scenario.network, scenario.constants, sampler, scenario.policy,
        horizon=horizon, preload=getattr(scenario, "preload", ()), **options,
    )
    sim.run_steps()
    return sim.trace(), sim.metrics(seed=seed)


def crossing_rate(trace: Trace, probe: str) -> float:
    """Mean vehicles per step entering the probed segment."""
    if probe not in trace.probe_counts:
        raise ConfigurationError(f"no probe on edge {probe!r}")
    if trace.steps < 1:
        raise ConfigurationError("trace has no steps")
    return trace.probe_counts[probe] / trace.steps
