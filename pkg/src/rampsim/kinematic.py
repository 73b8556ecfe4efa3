"""Microscopic kinematic backend: continuous positions and speeds.

Vehicles command the more conservative of two longitudinal laws: a tracking
law that relaxes toward the free-flow speed, and a safety law that regulates
the bumper gap toward the speed-dependent safety distance

    S_e = h * v_e + S0 + (v_e^2 - v_l^2) / (2 |a_min|).

Taking the minimum makes free flow invariant: a vehicle at V_f behind an
adequate gap commands exactly zero acceleration and never overshoots V_f.
A hard emergency overlay applies full braking whenever the gap falls below
the pure braking requirement.  Integration is semi-implicit Euler on a fine
substep grid; policy decisions, arrivals, and releases happen only on the
tau grid, like the slot backend.

The residual X_f measures distance from safe free flow: X_f1 is the norm of
the stacked per-vehicle states (gap deficit, speed deviation, acceleration)
and X_f2 adds the worst predicted merge violation per vehicle over the last
adaptation period.  It drives the adaptive minimum-gap rule and is the
quantity the congestion-recovery experiment watches.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .constants import SimConstants
from .demand import RngStream
from .errors import CollisionError, ConfigurationError, ParameterError
from .network import Network, route_contains_merge
from .policy import (
    GapState,
    LocalView,
    alinea_accrue,
    alinea_update,
    AlineaState,
    DrraState,
    drra_begin_cycle,
    drra_decide,
    drra_note_release,
    gap_update,
)

__all__ = [
    "KinParams",
    "KinVehicleLog",
    "KinTrace",
    "safety_distance",
    "controller_accel",
    "predict_merge",
    "KinSim",
    "run",
]


@dataclass(frozen=True)
class KinParams:
    """Controller gains and integration settings."""

    K_v: float = 0.8     # speed tracking gain [1/s]
    K_g: float = 0.25    # gap regulation gain [1/s^2]
    K_l: float = 0.9     # relative speed gain [1/s]
    substeps: int = 20   # integration substeps per tau
    lookahead_m: float = 250.0    # leader search range across edges
    snap_eps: float = 1e-6        # free-flow snap threshold [m/s]

    def __post_init__(self):
        if self.K_v <= 0 or self.K_g <= 0 or self.K_l <= 0:
            raise ParameterError("controller gains must be positive")
        if self.substeps < 1:
            raise ParameterError("substeps must be >= 1")
        if self.lookahead_m <= 0:
            raise ParameterError("lookahead must be positive")


def safety_distance(v_e: float, v_l: float, constants: SimConstants) -> float:
    """Gap a follower at v_e needs behind a leader at v_l.

    Negative values are possible when the leader is much faster; callers
    that need a physical gap clamp at zero.
    """
    h = float(constants.h)
    S0 = float(constants.S0)
    brake = 2.0 * abs(float(constants.a_min))
    return h * v_e + S0 + (v_e * v_e - v_l * v_l) / brake


def controller_accel(v: float, y: float | None, v_l: float,
                     constants: SimConstants, params: KinParams) -> tuple[float, str]:
    """One control evaluation: returns (acceleration, limiting regime).

    ``y`` is the bumper-to-bumper gap to the leader (None when free road).
    The regime names which law produced the command; it also selects the
    projection law in merge predictions.
    """
    a_min = float(constants.a_min)
    a_max = float(constants.a_max)
    Vf = float(constants.Vf)
    a_track = params.K_v * (Vf - v)
    if y is None:
        return (min(max(a_track, a_min), a_max), "track")
    S = safety_distance(v, v_l, constants)
    a_safe = params.K_g * (y - S) + params.K_l * (v_l - v)
    if a_safe < a_track:
        a, regime = a_safe, "safety"
    else:
        a, regime = a_track, "track"
    # pure braking overlay: full brake when closing can no longer be undone
    brake_gap = float(constants.S0) + max(0.0, v * v - v_l * v_l) / (2.0 * abs(a_min))
    if y < brake_gap:
        a, regime = a_min, "safety"
    return (min(max(a, a_min), a_max), regime)


def _rollout(x0: float, v0: float, mode: str, t: float,
             constants: SimConstants, params: KinParams) -> tuple[float, float]:
    """Predicted (position, speed) after ``t`` seconds in a frozen mode.

    Tracking mode follows the relaxation law exactly; safety mode is taken
    as constant speed.
    """
    if mode == "track":
        Vf = float(constants.Vf)
        decay = math.exp(-params.K_v * t)
        v = Vf + (v0 - Vf) * decay
        x = x0 + Vf * t + (v0 - Vf) * (1.0 - decay) / params.K_v
        return x, v
    return x0 + v0 * t, v0


def predict_merge(dist_to_node: float, ego_v: float, ego_mode: str,
                  leader_gap_at_node: float, leader_v: float, leader_mode: str,
                  horizon_s: float, constants: SimConstants,
                  params: KinParams) -> tuple[float, float, float] | None:
    """Project a merge: when will ego reach the node, and with what gap?

    ``leader_gap_at_node`` is the leader's current bumper distance beyond the
    node minus ego's distance to it... measured along ego's path: gap now =
    leader_front - ego_front - L with the node between them.  Returns
    (t_m, gap_hat, S_hat) or None when ego does not reach the node within
    the horizon.
    """
    # solve ego position == dist_to_node by bisection; position is monotone
    x_end, _ = _rollout(0.0, ego_v, ego_mode, horizon_s, constants, params)
    if x_end < dist_to_node:
        return None
    lo, hi = 0.0, horizon_s
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        x_mid, _ = _rollout(0.0, ego_v, ego_mode, mid, constants, params)
        if x_mid < dist_to_node:
            lo = mid
        else:
            hi = mid
    t_m = 0.5 * (lo + hi)
    _, ve = _rollout(0.0, ego_v, ego_mode, t_m, constants, params)
    xl, vl = _rollout(0.0, leader_v, leader_mode, t_m, constants, params)
    xe, _ = _rollout(0.0, ego_v, ego_mode, t_m, constants, params)
    gap_hat = leader_gap_at_node + xl - xe
    S_hat = safety_distance(ve, vl, constants)
    return t_m, gap_hat, S_hat


class _KV:
    __slots__ = ("vid", "route", "li", "x", "v", "a", "mode")

    def __init__(self, vid, route, li, x, v):
        self.vid = vid
        self.route = route
        self.li = li
        self.x = x
        self.v = v
        self.a = 0.0
        self.mode = "track"


@dataclass(slots=True)
class KinVehicleLog:
    vid: int
    ramp: str | None
    route: str
    arrive_s: float | None
    release_s: float | None = None
    exit_s: float | None = None


@dataclass
class KinTrace:
    steps: int
    tau_s: float
    ramps: tuple[str, ...]
    queue_total: np.ndarray
    queue_per_ramp: np.ndarray | None
    logs: list[KinVehicleLog] | None
    # (t_s, xf1, xf2, xf_total, min_gap_s) at each adaptation boundary
    xf_series: list[tuple[float, float, float, float, float]]


class KinSim:
    """Continuous-dynamics run of a scenario.

    Requires every segment to declare ``length_m``.  Routes, demand, and the
    policy layer are shared with the slot backend; only the road dynamics
    and the merge safety test differ.
    """

    def __init__(self, network: Network, constants: SimConstants, sampler,
                 policy_cfg, *, horizon_steps: int, params: KinParams | None = None,
                 preload_ring=None, seed: int = 0,
                 per_ramp_trace: bool = True, log_vehicles: bool = True,
                 observer=None):
        self.network = network
        self.constants = constants
        self.cf = constants.float_view()
        self.sampler = sampler
        self.params = params or KinParams()
        self.observer = observer
        self.tau_s = self.cf["tau"]
        self.dt = self.tau_s / self.params.substeps

        self.length: dict[str, float] = {}
        for e in network.edges.values():
            if e.kind == "segment":
                if e.length_m is None or e.length_m <= 0:
                    raise ConfigurationError(
                        f"segment {e.id!r} needs length_m for the kinematic backend"
                    )
                self.length[e.id] = float(e.length_m)
        self.on_edge: dict[str, list[_KV]] = {eid: [] for eid in self.length}

        self.ramps = tuple(network.ramps)
        self.queues: dict[str, deque] = {r: deque() for r in self.ramps}
        self.route_legs = {rid: network.route_legs(rid) for rid in network.routes}
        self._merge_free = {
            rid: not route_contains_merge(network, rid) for rid in network.routes
        }
        # incoming mainline edge per ramp node, for the follower check
        self._ramp_in_edge: dict[str, str | None] = {}
        for r in self.ramps:
            nid = network.ramp_node[r]
            segs = [e for e in network.in_edges[nid]
                    if network.edges[e].kind == "segment"]
            self._ramp_in_edge[r] = segs[0] if segs else None

        self.kind = policy_cfg.kind
        if self.kind == "drra":
            if policy_cfg.schedule is None:
                raise ConfigurationError("drra policy needs a release schedule")
            self.sched = policy_cfg.schedule
            self.T_per_steps = max(1, int(policy_cfg.T_per_steps))
            gap = GapState.initial(
                xf0=0.0, T_per_s=self.T_per_steps * self.tau_s,
                gamma1=policy_cfg.gamma1, gamma2=policy_cfg.gamma2,
                theta0=policy_cfg.theta0, beta=policy_cfg.beta,
            )
            self.drra = DrraState.initial(
                self.ramps, policy_cfg.T, non_reactive=policy_cfg.non_reactive,
                gap=gap,
            )
            self.quota_after_arrivals = bool(
                getattr(policy_cfg, "quota_includes_boundary_arrivals", False)
            )
        elif self.kind == "safe_alinea":
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
            self._zone_m = float(policy_cfg.alinea_detector_zone_m)
            self._occ_acc = {r: 0.0 for r in self.ramps}
            self._occ_n = 0
        else:
            raise ConfigurationError(f"unknown policy kind {policy_cfg.kind!r}")

        self.horizon = horizon_steps
        self.s = 0
        self._next_vid = 0
        self.logs: list[KinVehicleLog] | None = [] if log_vehicles else None
        self.exits = 0
        self.arrivals = {r: 0 for r in self.ramps}
        self.releases = {r: 0 for r in self.ramps}
        self.queue_total = np.zeros(horizon_steps + 1, dtype=np.int64)
        self.queue_per_ramp = (
            np.zeros((horizon_steps + 1, len(self.ramps)), dtype=np.int32)
            if per_ramp_trace else None
        )
        self.xf_series: list[tuple[float, float, float, float, float]] = []
        self._violations: dict[int, float] = {}  # vid -> worst predicted merge gap deficit

        if preload_ring is not None:
            self._preload_ring(seed=seed, **preload_ring)
        self._init_xf()
        if self.kind == "drra":
            self.drra = drra_begin_cycle(
                self.drra, {r: len(self.queues[r]) for r in self.ramps}, 0
            )
        self._record(0)

    # -- preload ----------------------------------------------------------------

    def _ring_order(self) -> list[str]:
        """Segment ids around a ring, starting at the lowest ramp's node."""
        start = self.network.ramp_node[self.ramps[0]]
        order = []
        nid = start
        while True:
            outs = [e for e in self.network.out_edges[nid]
                    if self.network.edges[e].kind == "segment"]
            if len(outs) != 1:
                raise ConfigurationError("ring preload needs a single directed loop")
            order.append(outs[0])
            nid = self.network.edges[outs[0]].head
            if nid == start:
                return order
            if len(order) > len(self.length):
                raise ConfigurationError("segments do not close into a ring")

    def _preload_ring(self, count: int, speed: float, spacing_m: float,
                      seed: int = 0) -> None:
        """Drop ``count`` vehicles around the loop at uniform spacing.

        Each vehicle is owned by the nearest ramp at or behind its position
        and draws its route from that ramp's routing row, restricted to
        routes that traverse its current segment at the right leg.
        """
        order = self._ring_order()
        cum = []
        pos = 0.0
        for eid in order:
            cum.append(pos)
            pos += self.length[eid]
        perimeter = pos
        if count * spacing_m > perimeter + 1e-9:
            raise ConfigurationError(
                f"{count} vehicles at {spacing_m} m do not fit on {perimeter} m"
            )
        ramp_pos = {}
        for r in self.ramps:
            nid = self.network.ramp_node[r]
            for eid, c0 in zip(order, cum):
                if self.network.edges[eid].tail == nid:
                    ramp_pos[r] = c0
        streams = RngStream(seed)
        spec = self.sampler.spec if hasattr(self.sampler, "spec") else None
        if spec is None:
            raise ConfigurationError("ring preload needs a routing spec on the sampler")

        placed = []
        for k in range(count):
            arc = (k * spacing_m) % perimeter
            idx = max(i for i, c0 in enumerate(cum) if c0 <= arc + 1e-9)
            eid, x = order[idx], arc - cum[idx]
            owner, best = None, -1.0
            for r in self.ramps:
                if ramp_pos[r] <= arc + 1e-9 and ramp_pos[r] > best:
                    owner, best = r, ramp_pos[r]
            # routes start at the owner's node; walk each route's legs until
            # the cumulative offset interval covers this position
            rel = (arc - ramp_pos[owner]) % perimeter
            feasible: dict[str, tuple[float, int]] = {}
            for rid, p in spec.routing[owner].items():
                off = 0.0
                for li, leg in enumerate(self.route_legs[rid]):
                    if leg == eid and off - 1e-9 <= rel < off + self.length[leg] - 1e-9:
                        feasible[rid] = (float(p), li)
                        break
                    off += self.length[leg]
            if not feasible:
                raise ConfigurationError(
                    f"no route of ramp {owner!r} covers position {arc:.1f} m"
                )
            u = streams.substream(owner, "preload").uniform()
            total = sum(p for p, _ in feasible.values())
            rids = sorted(feasible)
            pick, pli = rids[-1], feasible[rids[-1]][1]
            acc = 0.0
            for rid in rids:
                p, li = feasible[rid]
                acc += p / total
                if u < acc:
                    pick, pli = rid, li
                    break
            vid = self._next_vid
            self._next_vid += 1
            kv = _KV(vid, pick, pli, x, speed)
            kv.mode = "safety"
            placed.append((eid, kv))
            if self.logs is not None:
                self.logs.append(KinVehicleLog(vid, None, pick, None))
        for eid, kv in placed:
            self.on_edge[eid].append(kv)
        for eid in self.on_edge:
            self.on_edge[eid].sort(key=lambda kv: -kv.x)

    # -- leader search ------------------------------------------------------------

    def _leader_of(self, eid: str, idx: int) -> tuple[float, float, str] | None:
        """(gap, leader speed, leader mode) for vehicle idx on edge eid."""
        lst = self.on_edge[eid]
        kv = lst[idx]
        if idx > 0:
            lead = lst[idx - 1]
            return (lead.x - kv.x - self.cf["L"], lead.v, lead.mode)
        # scan along the remaining route legs
        legs = self.route_legs[kv.route]
        dist = self.length[eid] - kv.x
        li = kv.li + 1
        while li < len(legs) and dist <= self.params.lookahead_m:
            nxt = self.on_edge[legs[li]]
            if nxt:
                lead = nxt[-1]
                return (dist + lead.x - self.cf["L"], lead.v, lead.mode)
            dist += self.length[legs[li]]
            li += 1
        return None

    # -- main loop ------------------------------------------------------------------

    def run_steps(self, n: int | None = None) -> None:
        end = self.horizon if n is None else min(self.s + n, self.horizon)
        while self.s < end:
            self._step()

    def _step(self) -> None:
        s = self.s + 1
        t0 = self.s * self.tau_s

        if self.kind == "drra":
            if s % self.T_per_steps == 0:
                self._adapt_gap(t0)
            if not self.quota_after_arrivals and s % self.drra.T == 0:
                self._freeze(s)
        else:
            if s % self._period_steps == 0:
                self._alinea_period()

        for r in self.ramps:
            rid = self.sampler.poll(r, s)
            if rid is not None:
                vid = self._next_vid
                self._next_vid += 1
                self.queues[r].append((vid, rid))
                self.arrivals[r] += 1
                if self.logs is not None:
                    self.logs.append(KinVehicleLog(vid, r, rid, t0))
        if self.kind == "drra" and self.quota_after_arrivals and s % self.drra.T == 0:
            self._freeze(s)

        self._releases(s, t0)
        for k in range(self.params.substeps):
            self._substep(t0 + k * self.dt)
        if self.kind == "drra" and self.drra.gap is not None:
            self._collect_predictions(t0)
        if self.kind == "safe_alinea":
            self._sample_occupancy()

        self.s = s
        self._record(s)
        if self.observer is not None:
            self.observer(self, s)

    def _freeze(self, s: int) -> None:
        self.drra = drra_begin_cycle(
            self.drra, {r: len(self.queues[r]) for r in self.ramps}, s
        )

    def _merge_safe(self, ramp: str, route: str) -> bool:
        """Kinematic release safety: leader and follower gaps at the node."""
        Vf = self.cf["Vf"]
        L = self.cf["L"]
        first = self.route_legs[route][0]
        lst = self.on_edge[first]
        if lst:
            lead = lst[-1]
            gap = lead.x - L
            if gap < max(safety_distance(Vf, lead.v, self.constants), 0.0):
                return False
        else:
            legs = self.route_legs[route]
            dist = self.length[first]
            li = 1
            while li < len(legs) and dist <= self.params.lookahead_m:
                nxt = self.on_edge[legs[li]]
                if nxt:
                    lead = nxt[-1]
                    gap = dist + lead.x - L
                    if gap < max(safety_distance(Vf, lead.v, self.constants), 0.0):
                        return False
                    break
                dist += self.length[legs[li]]
                li += 1
        in_edge = self._ramp_in_edge.get(self.network.route_ramp(route))
        if in_edge is not None and in_edge in self.on_edge:
            ups = self.on_edge[in_edge]
            if ups:
                fol = ups[0]
                gap = self.length[in_edge] - fol.x - L
                if gap < max(safety_distance(fol.v, Vf, self.constants), 0.0):
                    return False
        return True

    def _releases(self, s: int, t0: float) -> None:
        if self.kind == "safe_alinea":
            for r in self.ramps:
                self.alinea[r] = alinea_accrue(self.alinea[r], self.tau_s)
        for r in self.ramps:
            q = self.queues[r]
            if not q:
                continue
            head_route = q[0][1]
            if self.kind == "drra":
                view = LocalView(
                    step=s, queue_len=len(q),
                    safe_to_release=self._merge_safe(r, head_route),
                    head_merge_free=self._merge_free[head_route],
                )
                d = drra_decide(r, t0, self.drra, self.sched, view)
                if d.release:
                    self._insert(r, t0)
                    self.drra = drra_note_release(self.drra, r, t0)
            else:
                st = self.alinea[r]
                if st.credit >= 1.0 - 1e-9 and self._merge_safe(r, head_route):
                    self._insert(r, t0)
                    self.alinea[r] = replace(st, credit=st.credit - 1.0)

    def _insert(self, ramp: str, t0: float) -> None:
        vid, rid = self.queues[ramp].popleft()
        kv = _KV(vid, rid, 0, 0.0, self.cf["Vf"])
        self.on_edge[self.route_legs[rid][0]].append(kv)
        self.releases[ramp] += 1
        if self.logs is not None:
            self.logs[vid].release_s = t0

    def _substep(self, t: float) -> None:
        plans = []
        for eid, lst in self.on_edge.items():
            for idx, kv in enumerate(lst):
                lead = self._leader_of(eid, idx)
                if lead is None:
                    a, mode = controller_accel(
                        kv.v, None, 0.0, self.constants, self.params)
                else:
                    gap, lv, _ = lead
                    if gap < -1e-9:
                        raise CollisionError(
                            f"negative gap {gap:.3f} m on {eid!r} at t={t:.2f}",
                            (lst[idx - 1].vid if idx > 0 else -1, kv.vid),
                        )
                    a, mode = controller_accel(
                        kv.v, gap, lv, self.constants, self.params)
                plans.append((eid, kv, a, mode))
        moved: list[tuple[str, _KV]] = []
        Vf = self.cf["Vf"]
        for eid, kv, a, mode in plans:
            kv.mode = mode
            kv.a = a
            kv.v = max(kv.v + a * self.dt, 0.0)
            if mode == "track" and abs(Vf - kv.v) <= self.params.snap_eps:
                kv.v = Vf
                kv.a = 0.0
            kv.x += kv.v * self.dt
            if kv.x > self.length[eid]:
                moved.append((eid, kv))
        for eid, kv in moved:
            lst = self.on_edge[eid]
            if lst and lst[0] is kv:
                lst.pop(0)
            else:
                lst.remove(kv)
            legs = self.route_legs[kv.route]
            if kv.li + 1 < len(legs):
                kv.x -= self.length[eid]
                kv.li += 1
                self.on_edge[legs[kv.li]].append(kv)
            else:
                self.exits += 1
                self._violations.pop(kv.vid, None)
                if self.logs is not None:
                    self.logs[kv.vid].exit_s = t + self.dt
        for eid, lst in self.on_edge.items():
            if any(lst[i].x < lst[i + 1].x for i in range(len(lst) - 1)):
                lst.sort(key=lambda kv: -kv.x)

    # -- residual ---------------------------------------------------------------

    def _xf1(self) -> float:
        acc = 0.0
        Vf = self.cf["Vf"]
        for eid, lst in self.on_edge.items():
            for idx, kv in enumerate(lst):
                lead = self._leader_of(eid, idx)
                if lead is not None:
                    gap, lv, _ = lead
                    S = safety_distance(kv.v, lv, self.constants)
                    # dead band: releases sit exactly on the gap boundary, and
                    # rounding dust there must not read as a violation
                    if gap < S - 1e-9:
                        acc += (gap - S) ** 2
                dv = kv.v - Vf
                acc += dv * dv + kv.a * kv.a
        return math.sqrt(acc)

    def _collect_predictions(self, t0: float) -> None:
        """Record the worst predicted merge violation per approaching vehicle."""
        params = self.params
        horizon = (self.T_per_steps if self.kind == "drra" else 2) * self.tau_s
        for nid, node in self.network.nodes.items():
            if node.kind not in ("on_ramp_node", "merge_node"):
                continue
            for in_eid in self.network.in_edges[nid]:
                if self.network.edges[in_eid].kind != "segment" or in_eid not in self.on_edge:
                    continue
                lst = self.on_edge[in_eid]
                if not lst:
                    continue
                kv = lst[0]  # only the front vehicle can cross first
                dist = self.length[in_eid] - kv.x
                if dist > max(kv.v, 1.0) * horizon:
                    continue
                lead = self._leader_of(in_eid, 0)
                if lead is None:
                    continue
                gap, lv, lmode = lead
                pred = predict_merge(dist, kv.v, kv.mode, gap, lv, lmode,
                                     horizon, self.constants, params)
                if pred is None:
                    continue
                _, gap_hat, S_hat = pred
                viol = max(S_hat - gap_hat, 0.0)
                if viol > 1e-9:
                    prev = self._violations.get(kv.vid, 0.0)
                    if viol > prev:
                        self._violations[kv.vid] = viol

    def _adapt_gap(self, t: float) -> None:
        xf1 = self._xf1()
        xf2 = sum(self._violations.values())
        self._violations.clear()
        xf = xf1 + xf2
        if xf < 1e-9:
            # sensor noise floor: exponential relaxation tails never reach an
            # exact zero, and the adaptation must not grow theta on them
            xf = 0.0
        gap = gap_update(self.drra.gap, xf)
        self.drra = replace(self.drra, gap=gap)
        self.xf_series.append((t, xf1, xf2, xf, gap.g))

    def _init_xf(self) -> None:
        if self.kind == "drra" and self.drra.gap is not None:
            xf0 = self._xf1()
            self.drra = replace(self.drra, gap=replace(self.drra.gap, xf_prev=xf0))
            self.xf_series.append((0.0, xf0, 0.0, xf0, 0.0))

    # -- detectors ----------------------------------------------------------------

    def _sample_occupancy(self) -> None:
        L = self.cf["L"]
        self._occ_n += 1
        for r in self.ramps:
            rid0 = self.network.routes_from(r)[0]
            eid = self.route_legs[rid0][0]
            z = min(self._zone_m, self.length[eid])
            covered = 0.0
            for kv in self.on_edge[eid]:
                lo, hi = kv.x - L, kv.x
                covered += max(0.0, min(hi, z) - max(lo, 0.0))
            self._occ_acc[r] += 100.0 * covered / z

    def _alinea_period(self) -> None:
        n = max(self._occ_n, 1)
        for r in self.ramps:
            self.alinea[r] = alinea_update(self.alinea[r], self._occ_acc[r] / n)
            self._occ_acc[r] = 0.0
        self._occ_n = 0

    # -- bookkeeping ----------------------------------------------------------------

    def _record(self, s: int) -> None:
        total = 0
        for i, r in enumerate(self.ramps):
            n = len(self.queues[r])
            total += n
            if self.queue_per_ramp is not None:
                self.queue_per_ramp[s, i] = n
        self.queue_total[s] = total

    def vehicles_on_road(self) -> int:
        return sum(len(lst) for lst in self.on_edge.values())

    def trace(self) -> KinTrace:
        return KinTrace(
            steps=self.s, tau_s=self.tau_s, ramps=self.ramps,
            queue_total=self.queue_total[: self.s + 1],
            queue_per_ramp=(
                self.queue_per_ramp[: self.s + 1]
                if self.queue_per_ramp is not None else None
            ),
            logs=self.logs, xf_series=list(self.xf_series),
        )


def run(scenario, horizon_steps: int, seed: int, **options) -> tuple[KinTrace, dict]:
    """Run a scenario on the kinematic backend."""
    from .demand import BernoulliDemand

    sampler = options.pop("sampler", None)
    if sampler is None:
        sampler = BernoulliDemand(scenario.network, scenario.demand, seed)
        sampler.spec = scenario.demand
    sim = KinSim(
        scenario.network, scenario.constants, sampler, scenario.policy,
        horizon_steps=horizon_steps, seed=seed,
        preload_ring=getattr(scenario, "preload_ring", None), **options,
    )
    sim.run_steps()
    metrics = {
        "horizon": sim.s, "seed": seed, "arrivals": dict(sim.arrivals),
        "releases": dict(sim.releases), "exits": sim.exits,
        "final_queue": {r: len(sim.queues[r]) for r in sim.ramps},
    }
    return sim.trace(), metrics
