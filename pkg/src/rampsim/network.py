"""Freeway network model: nodes, directed edges, routes.

A network is a directed graph.  Mainline ``segment`` edges carry traffic
between nodes; each on-ramp is an ``on_ramp`` edge from a source node into an
``on_ramp_node`` on the mainline, and each off-ramp is an ``off_ramp`` edge
from an ``off_ramp_node`` to a sink.  A route is an on-ramp edge, a chain of
adjacent segments, and a final off-ramp edge.

Throughout the package a ramp is identified by its on-ramp *edge* id; the
node it merges at is ``Network.ramp_node[ramp_id]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .constants import SimConstants
from .errors import ConfigurationError

__all__ = [
    "NODE_KINDS",
    "EDGE_KINDS",
    "Node",
    "Edge",
    "Route",
    "Network",
    "Violation",
    "ValidationReport",
    "validate",
    "route_contains_merge",
    "crossing_steps",
]

NODE_KINDS = frozenset(
    {"source", "sink", "on_ramp_node", "off_ramp_node", "merge_node", "diverge_node"}
)
EDGE_KINDS = frozenset({"segment", "on_ramp", "off_ramp"})

# Node kinds where two traffic streams can join.
MERGE_NODE_KINDS = frozenset({"merge_node", "on_ramp_node"})


@dataclass(frozen=True)
class Node:
    id: str
    kind: str


@dataclass(frozen=True)
class Edge:
    """Directed edge.  ``slot_count`` applies to segments only; ``length_m``
    is optional and, when present, must round to ``slot_count`` slots."""

    id: str
    tail: str
    head: str
    kind: str
    slot_count: int | None = None
    length_m: float | None = None


@dataclass(frozen=True)
class Route:
    id: str
    edges: tuple[str, ...]


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.subject}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, subject: str, message: str) -> None:
        self.violations.append(Violation(code, subject, message))

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(str(v) for v in self.violations)


class Network:
    """Indexed, immutable-by-convention view of a node/edge/route list.

    Construction is permissive: structural problems are reported by
    ``validate`` rather than raised here, except for duplicate ids and
    dangling references, which make the object unusable.
    """

    def __init__(self, nodes, edges, routes=()):
        self.nodes: dict[str, Node] = {}
        for n in nodes:
            if n.id in self.nodes:
                raise ConfigurationError(f"duplicate node id {n.id!r}")
            self.nodes[n.id] = n
        self.edges: dict[str, Edge] = {}
        for e in edges:
            if e.id in self.edges:
                raise ConfigurationError(f"duplicate edge id {e.id!r}")
            if e.tail not in self.nodes or e.head not in self.nodes:
                raise ConfigurationError(
                    f"edge {e.id!r} references unknown node {e.tail!r} or {e.head!r}"
                )
            self.edges[e.id] = e
        self.routes: dict[str, Route] = {}
        for r in routes:
            if r.id in self.routes:
                raise ConfigurationError(f"duplicate route id {r.id!r}")
            for eid in r.edges:
                if eid not in self.edges:
                    raise ConfigurationError(f"route {r.id!r} references unknown edge {eid!r}")
            self.routes[r.id] = r

        self.in_edges: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        self.out_edges: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        for e in self.edges.values():
            self.out_edges[e.tail].append(e.id)
            self.in_edges[e.head].append(e.id)
        for lst in self.in_edges.values():
            lst.sort()
        for lst in self.out_edges.values():
            lst.sort()

        # ramp id == on-ramp edge id, ordered for deterministic iteration
        self.ramps: list[str] = sorted(
            e.id for e in self.edges.values() if e.kind == "on_ramp"
        )
        self.ramp_node: dict[str, str] = {r: self.edges[r].head for r in self.ramps}
        self.ramp_at_node: dict[str, str] = {}
        for r in self.ramps:
            # first ramp wins; validate() reports the duplicate
            self.ramp_at_node.setdefault(self.ramp_node[r], r)

        self._acyclic: bool | None = None
        self._pred_ramps: dict[str, tuple[str, ...]] = {}

    # -- structure queries ---------------------------------------------------

    @property
    def acyclic(self) -> bool:
        """True when segment edges form no directed cycle."""
        if self._acyclic is None:
            indeg = {nid: 0 for nid in self.nodes}
            segs = [e for e in self.edges.values() if e.kind == "segment"]
            for e in segs:
                indeg[e.head] += 1
            queue = [nid for nid, d in indeg.items() if d == 0]
            seen = 0
            while queue:
                nid = queue.pop()
                seen += 1
                for eid in self.out_edges[nid]:
                    e = self.edges[eid]
                    if e.kind != "segment":
                        continue
                    indeg[e.head] -= 1
                    if indeg[e.head] == 0:
                        queue.append(e.head)
            self._acyclic = seen == len(self.nodes)
        return self._acyclic

    def upstream_ramps(self, ramp: str) -> tuple[str, ...]:
        """Ramps immediately upstream of ``ramp``: walk segment edges
        backwards from its node and collect the first on-ramp node met on
        each branch."""
        if ramp in self._pred_ramps:
            return self._pred_ramps[ramp]
        if ramp not in self.ramp_node:
            raise ConfigurationError(f"unknown ramp {ramp!r}")
        found: set[str] = set()
        stack = [self.ramp_node[ramp]]
        visited = {stack[0]}
        while stack:
            nid = stack.pop()
            for eid in self.in_edges[nid]:
                e = self.edges[eid]
                if e.kind != "segment":
                    continue
                t = e.tail
                if self.nodes[t].kind == "on_ramp_node" and t in self.ramp_at_node:
                    found.add(self.ramp_at_node[t])
                elif t not in visited:
                    visited.add(t)
                    stack.append(t)
        out = tuple(sorted(found))
        self._pred_ramps[ramp] = out
        return out

    def downstream_ramps(self, ramp: str) -> tuple[str, ...]:
        """Inverse of ``upstream_ramps``."""
        return tuple(sorted(j for j in self.ramps if ramp in self.upstream_ramps(j)))

    # -- route queries -------------------------------------------------------

    def route_legs(self, route_id: str) -> tuple[str, ...]:
        """Mainline segment edges of a route, in travel order."""
        r = self._route(route_id)
        return tuple(eid for eid in r.edges if self.edges[eid].kind == "segment")

    def route_ramp(self, route_id: str) -> str:
        return self._route(route_id).edges[0]

    def route_node_arrivals(self, route_id: str) -> list[tuple[str, int, str]]:
        """Mainline nodes a route crosses, with cumulative slot steps from
        release and the edge it arrives by.

        The first entry is the entry on-ramp node at 0 steps via the on-ramp
        edge; each subsequent entry is the head of a segment leg.
        """
        r = self._route(route_id)
        ramp_edge = self.edges[r.edges[0]]
        out = [(ramp_edge.head, 0, ramp_edge.id)]
        steps = 0
        for eid in self.route_legs(route_id):
            e = self.edges[eid]
            if e.slot_count is None or e.slot_count < 1:
                raise ConfigurationError(f"segment {eid!r} on route {route_id!r} has no slot_count")
            steps += e.slot_count
            out.append((e.head, steps, eid))
        return out

    def routes_from(self, ramp: str) -> list[str]:
        return sorted(
            rid for rid, r in self.routes.items() if r.edges and r.edges[0] == ramp
        )

    def _route(self, route_id: str) -> Route:
        try:
            return self.routes[route_id]
        except KeyError:
            raise ConfigurationError(f"unknown route {route_id!r}") from None


def route_contains_merge(network: Network, route_id: str) -> bool:
    """True when the route crosses any joining node strictly after its entry.

    Joining nodes are regular merges and on-ramp nodes (another ramp's entry
    point, or the route's own entry node revisited on a loop).
    """
    arrivals = network.route_node_arrivals(route_id)
    return any(
        network.nodes[nid].kind in MERGE_NODE_KINDS for nid, _, _ in arrivals[1:]
    )


def crossing_steps(network: Network, route_id: str, node_id: str) -> int:
    """Slot steps from release at the route's entry node until first reaching
    ``node_id``.  Zero for the entry node itself."""
    for nid, steps, _ in network.route_node_arrivals(route_id):
        if nid == node_id:
            return steps
    raise ConfigurationError(f"node {node_id!r} is not on route {route_id!r}")


def validate(network: Network, constants: SimConstants | None = None) -> ValidationReport:
    """Check every structural invariant; the report lists all violations.

    When ``constants`` is given, declared segment lengths are also checked
    against their slot counts (|length - count * spacing| <= spacing / 2).
    """
    rep = ValidationReport()

    for n in network.nodes.values():
        if n.kind not in NODE_KINDS:
            rep.add("node-kind", n.id, f"unknown node kind {n.kind!r}")
    for e in network.edges.values():
        if e.kind not in EDGE_KINDS:
            rep.add("edge-kind", e.id, f"unknown edge kind {e.kind!r}")

    for e in network.edges.values():
        if e.kind == "segment":
            if e.slot_count is None or e.slot_count < 1:
                rep.add("slot-count", e.id, f"segment needs slot_count >= 1, got {e.slot_count}")
            elif e.length_m is not None and constants is not None:
                spacing = float(constants.slot_spacing)
                want = round(e.length_m / spacing)
                if want != e.slot_count or abs(e.length_m - e.slot_count * spacing) > spacing / 2:
                    rep.add(
                        "length-mismatch", e.id,
                        f"length {e.length_m} m is not {e.slot_count} slots of {spacing} m",
                    )
        elif e.slot_count is not None:
            rep.add("slot-count", e.id, f"{e.kind} edge must not declare slot_count")

    def kinds_in(nid):
        return [network.edges[eid].kind for eid in network.in_edges[nid]]

    def kinds_out(nid):
        return [network.edges[eid].kind for eid in network.out_edges[nid]]

    for n in network.nodes.values():
        ki, ko = kinds_in(n.id), kinds_out(n.id)
        if n.kind == "source":
            if ki or ko != ["on_ramp"]:
                rep.add("source-shape", n.id,
                        "source must have no incoming edges and exactly one outgoing on-ramp")
        elif n.kind == "sink":
            if ko or ki != ["off_ramp"]:
                rep.add("sink-shape", n.id,
                        "sink must have no outgoing edges and exactly one incoming off-ramp")
        elif n.kind == "on_ramp_node":
            if ki.count("on_ramp") != 1:
                rep.add("ramp-node-shape", n.id, "on-ramp node needs exactly one incoming on-ramp")
            if ki.count("segment") > 1:
                rep.add("ramp-node-shape", n.id, "on-ramp node allows at most one incoming segment")
            if ko != ["segment"]:
                rep.add("ramp-node-shape", n.id, "on-ramp node needs exactly one outgoing segment")
            if ki.count("off_ramp"):
                rep.add("ramp-node-shape", n.id, "on-ramp node cannot receive an off-ramp")
        elif n.kind == "off_ramp_node":
            if ko.count("off_ramp") != 1:
                rep.add("offramp-node-shape", n.id,
                        "off-ramp node needs exactly one outgoing off-ramp")
            if ko.count("segment") > 1:
                rep.add("offramp-node-shape", n.id,
                        "off-ramp node allows at most one outgoing segment")
            if ki != ["segment"]:
                rep.add("offramp-node-shape", n.id,
                        "off-ramp node needs exactly one incoming segment")
        elif n.kind == "merge_node":
            if len(ki) < 2 or set(ki) != {"segment"}:
                rep.add("merge-shape", n.id, "merge node needs >= 2 incoming segments and nothing else")
            if ko != ["segment"]:
                rep.add("merge-shape", n.id, "merge node needs exactly one outgoing segment")
        elif n.kind == "diverge_node":
            if ki != ["segment"]:
                rep.add("diverge-shape", n.id, "diverge node needs exactly one incoming segment")
            if len(ko) < 2 or set(ko) != {"segment"}:
                rep.add("diverge-shape", n.id, "diverge node needs >= 2 outgoing segments and nothing else")

    for e in network.edges.values():
        if e.kind == "on_ramp":
            if network.nodes[e.tail].kind != "source" or network.nodes[e.head].kind != "on_ramp_node":
                rep.add("ramp-endpoints", e.id, "on-ramp must run source -> on_ramp_node")
        elif e.kind == "off_ramp":
            if network.nodes[e.tail].kind != "off_ramp_node" or network.nodes[e.head].kind != "sink":
                rep.add("offramp-endpoints", e.id, "off-ramp must run off_ramp_node -> sink")

    seen_nodes: dict[str, str] = {}
    for r in network.ramps:
        nid = network.ramp_node[r]
        if nid in seen_nodes:
            rep.add("ramp-node-shared", nid, f"ramps {seen_nodes[nid]!r} and {r!r} share a node")
        else:
            seen_nodes[nid] = r

    for r in network.routes.values():
        if len(r.edges) < 2:
            rep.add("route-shape", r.id, "route needs at least an on-ramp and an off-ramp edge")
            continue
        first, last = network.edges[r.edges[0]], network.edges[r.edges[-1]]
        if first.kind != "on_ramp":
            rep.add("route-shape", r.id, f"route must start with an on-ramp, got {first.kind}")
        if last.kind != "off_ramp":
            rep.add("route-shape", r.id, f"route must end with an off-ramp, got {last.kind}")
        for eid in r.edges[1:-1]:
            if network.edges[eid].kind != "segment":
                rep.add("route-shape", r.id, f"interior edge {eid!r} is not a segment")
        for a, b in zip(r.edges, r.edges[1:]):
            if network.edges[a].head != network.edges[b].tail:
                rep.add("route-broken", r.id, f"edges {a!r} and {b!r} are not adjacent")

    return rep
