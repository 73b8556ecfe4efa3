"""Periodic release schedules and conflict-freedom checking.

A ramp's schedule is a period ``b`` (in slot steps) and a set of offsets in
``[1..b]``; the ramp may release at steps ``s >= 1`` with ``s mod b`` in the
offset set (taking offset ``b`` to mean residue 0).  Two scheduled streams
conflict when vehicles released on them can reach a common node at the same
step via different incoming edges; because releases repeat with their
periods, this reduces to a residue test modulo gcd of the two periods.

The merge of a ramp's own releases into the mainline at its own node is
gate-kept by the runtime safety check rather than the schedule, so those
pairs are exempt by default; ``strict=True`` reports them too.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import ConfigurationError
from .network import Network

__all__ = [
    "RampSlots",
    "ReleaseSchedule",
    "ConflictWitness",
    "verify_conflict_free",
    "find_offsets",
    "HYPERPERIOD_CAP",
]

HYPERPERIOD_CAP = 1_000_000


@dataclass(frozen=True)
class RampSlots:
    period: int
    offsets: tuple[int, ...]

    def __post_init__(self):
        if self.period < 1:
            raise ConfigurationError(f"period must be >= 1, got {self.period}")
        if len(set(self.offsets)) != len(self.offsets):
            raise ConfigurationError(f"duplicate offsets {self.offsets}")
        for n in self.offsets:
            if not 1 <= n <= self.period:
                raise ConfigurationError(
                    f"offset {n} outside [1..{self.period}]"
                )
        object.__setattr__(self, "offsets", tuple(sorted(self.offsets)))

    @property
    def rate(self) -> Fraction:
        return Fraction(len(self.offsets), self.period)

    def allows(self, step: int) -> bool:
        """True when ``step`` is one of this ramp's scheduled release steps."""
        if step < 1:
            return False
        r = step % self.period
        return any(n % self.period == r for n in self.offsets)


@dataclass(frozen=True)
class ReleaseSchedule:
    entries: dict[str, RampSlots]

    def __getitem__(self, ramp: str) -> RampSlots:
        try:
            return self.entries[ramp]
        except KeyError:
            raise ConfigurationError(f"schedule has no entry for ramp {ramp!r}") from None

    def hyperperiod(self) -> int:
        h = 1
        for e in self.entries.values():
            h = math.lcm(h, e.period)
            if h > HYPERPERIOD_CAP:
                raise ConfigurationError(
                    f"schedule hyperperiod exceeds {HYPERPERIOD_CAP}"
                )
        return h

    def as_dict(self) -> dict:
        return {
            r: {"period": e.period, "offsets": list(e.offsets)}
            for r, e in sorted(self.entries.items())
        }


@dataclass(frozen=True)
class ConflictWitness:
    """Two release streams that can reach ``node`` at the same step.

    ``arrival_step`` is the earliest common arrival realizable with both
    release steps >= 1; the clash repeats every ``period`` steps.
    """

    node: str
    ramp1: str
    offset1: int
    route1: str
    crossing1: int
    ramp2: str
    offset2: int
    route2: str
    crossing2: int
    arrival_step: int
    period: int
    hyperperiod: int

    def as_dict(self) -> dict:
        return {
            "node": self.node,
            "event1": {"ramp": self.ramp1, "offset": self.offset1,
                       "route": self.route1, "crossing_steps": self.crossing1},
            "event2": {"ramp": self.ramp2, "offset": self.offset2,
                       "route": self.route2, "crossing_steps": self.crossing2},
            "arrival_step": self.arrival_step,
            "period": self.period,
            "hyperperiod": self.hyperperiod,
        }


def _crt_first_arrival(r1: int, b1: int, c1: int, r2: int, b2: int, c2: int) -> int:
    """Smallest common arrival step with both implied release steps >= 1."""
    g = math.gcd(b1, b2)
    lcm = b1 * b2 // g
    # solve a == r1 (mod b1), a == r2 (mod b2); caller guarantees solvable
    inv = pow(b1 // g, -1, b2 // g) if b2 // g > 1 else 0
    k = ((r2 - r1) // g * inv) % (b2 // g) if b2 // g > 0 else 0
    a = (r1 + b1 * k) % lcm
    need = max(c1, c2) + 1
    if a < need:
        a += ((need - a + lcm - 1) // lcm) * lcm
    return a


def _visit_records(network: Network, ramp: str, strict: bool):
    """(node, crossing, via_edge, route) tuples for every mainline node a
    release from ``ramp`` can cross.  The step-0 entry at the ramp's own node
    is included only in strict mode."""
    recs = []
    for rid in network.routes_from(ramp):
        arrivals = network.route_node_arrivals(rid)
        start = 0 if strict else 1
        for node, steps, via in arrivals[start:]:
            recs.append((node, steps, via, rid))
    return recs


def verify_conflict_free(
    network: Network, schedule: ReleaseSchedule, strict: bool = False
) -> ConflictWitness | None:
    """Return None when no two scheduled streams can collide, else the first
    witness in deterministic order (ramps by id, offsets ascending, routes by
    id)."""
    for ramp in network.ramps:
        if ramp not in schedule.entries:
            raise ConfigurationError(f"schedule missing ramp {ramp!r}")
    for ramp in schedule.entries:
        if ramp not in network.ramps:
            raise ConfigurationError(f"schedule names unknown ramp {ramp!r}")
    hyper = schedule.hyperperiod()

    flat = []  # (ramp, offset, route, node, crossing, via) in witness order
    for ramp in network.ramps:
        entry = schedule.entries[ramp]
        recs = _visit_records(network, ramp, strict)
        for offset in entry.offsets:
            for node, crossing, via, rid in recs:
                flat.append((ramp, offset, rid, node, crossing, via, entry.period))

    for i in range(len(flat)):
        r1, n1, p1, node1, c1, via1, b1 = flat[i]
        for j in range(i + 1, len(flat)):
            r2, n2, p2, node2, c2, via2, b2 = flat[j]
            if node1 != node2 or via1 == via2:
                continue
            if r1 == r2 and n1 == n2 and c1 == c2:
                # one physical vehicle cannot meet itself
                continue
            g = math.gcd(b1, b2)
            if (n1 + c1 - n2 - c2) % g != 0:
                continue
            arrival = _crt_first_arrival(
                (n1 + c1) % b1, b1, c1, (n2 + c2) % b2, b2, c2
            )
            return ConflictWitness(
                node=node1,
                ramp1=r1, offset1=n1, route1=p1, crossing1=c1,
                ramp2=r2, offset2=n2, route2=p2, crossing2=c2,
                arrival_step=arrival,
                period=b1 * b2 // g,
                hyperperiod=hyper,
            )
    return None


def find_offsets(
    network: Network, periods: dict[str, int], counts: dict[str, int]
) -> ReleaseSchedule | None:
    """Search for offset sets making the schedule conflict-free.

    ``periods[r]`` is ramp r's period b, ``counts[r]`` how many offsets it
    needs.  Deterministic backtracking: ramps in id order, candidate offset
    sets in lexicographic order.  Returns None when no assignment exists.
    """
    ramps = network.ramps
    for r in ramps:
        if r not in periods:
            raise ConfigurationError(f"no period for ramp {r!r}")
        if r not in counts:
            raise ConfigurationError(f"no offset count for ramp {r!r}")
        if periods[r] < 1:
            raise ConfigurationError(f"period for {r!r} must be >= 1")
        if not 0 <= counts[r] <= periods[r]:
            raise ConfigurationError(
                f"offset count for {r!r} must be in [0..{periods[r]}], got {counts[r]}"
            )
    h = 1
    for r in ramps:
        h = math.lcm(h, periods[r])
        if h > HYPERPERIOD_CAP:
            raise ConfigurationError(f"schedule hyperperiod exceeds {HYPERPERIOD_CAP}")

    records = {r: _visit_records(network, r, strict=False) for r in ramps}

    def compatible(r1, offs1, r2, offs2) -> bool:
        b1, b2 = periods[r1], periods[r2]
        g = math.gcd(b1, b2)
        for node1, c1, via1, _ in records[r1]:
            for node2, c2, via2, _ in records[r2]:
                if node1 != node2 or via1 == via2:
                    continue
                for n1 in offs1:
                    for n2 in offs2:
                        if r1 == r2 and n1 == n2 and c1 == c2:
                            continue
                        if (n1 + c1 - n2 - c2) % g == 0:
                            return False
        return True

    def self_ok(r, offs) -> bool:
        b = periods[r]
        recs = records[r]
        for i in range(len(recs)):
            node1, c1, via1, _ = recs[i]
            for j in range(i + 1, len(recs)):
                node2, c2, via2, _ = recs[j]
                if node1 != node2 or via1 == via2:
                    continue
                for n1 in offs:
                    for n2 in offs:
                        if n1 == n2 and c1 == c2:
                            continue
                        if (n1 + c1 - n2 - c2) % b == 0:
                            return False
        return True

    assigned: dict[str, tuple[int, ...]] = {}

    def place(idx: int) -> bool:
        if idx == len(ramps):
            return True
        r = ramps[idx]
        for combo in itertools.combinations(range(1, periods[r] + 1), counts[r]):
            if not self_ok(r, combo):
                continue
            if all(compatible(r, combo, q, assigned[q]) for q in ramps[:idx]):
                assigned[r] = combo
                if place(idx + 1):
                    return True
                del assigned[r]
        return False

    if not place(0):
        return None
    return ReleaseSchedule(
        entries={r: RampSlots(periods[r], assigned[r]) for r in ramps}
    )
