"""Stochastic demand: Bernoulli arrivals, route choice, induced node loads.

Arrival probabilities and routing fractions are held as exact rationals so
load coefficients and throughput bounds come out as exact fractions.  The
random layer uses one counter-based substream per (ramp, purpose) pair, so a
run is reproducible from a single base seed and any one stream can be
replayed in isolation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .constants import as_fraction
from .errors import ConfigurationError, ParameterError
from .network import Network

__all__ = [
    "DemandSpec",
    "RngStream",
    "SubStream",
    "sample_arrival",
    "sample_route",
    "induced_load",
    "LoadReport",
    "BernoulliDemand",
    "ScriptedDemand",
]

_BUF = 8192


class SubStream:
    """Buffered uniform [0,1) draws from one Philox substream."""

    def __init__(self, seed_seq: np.random.SeedSequence):
        self._gen = np.random.Generator(np.random.Philox(seed_seq))
        self._buf = self._gen.random(_BUF)
        self._pos = 0

    def uniform(self) -> float:
        if self._pos == _BUF:
            self._buf = self._gen.random(_BUF)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)


class RngStream:
    """Family of named substreams derived from one base seed.

    ``substream(ramp, purpose)`` always yields the same stream for the same
    (base_seed, ramp, purpose) triple, independent of creation order.
    """

    def __init__(self, base_seed: int):
        if not isinstance(base_seed, int) or base_seed < 0:
            raise ParameterError(f"base_seed must be a nonnegative int, got {base_seed!r}")
        self.base_seed = base_seed
        self._streams: dict[tuple[str, str], SubStream] = {}

    def substream(self, ramp: str, purpose: str) -> SubStream:
        key = (ramp, purpose)
        if key not in self._streams:
            digest = hashlib.blake2b(
                f"{ramp}|{purpose}".encode(), digest_size=8
            ).digest()
            spawn = int.from_bytes(digest, "big")
            seq = np.random.SeedSequence(self.base_seed, spawn_key=(spawn,))
            self._streams[key] = SubStream(seq)
        return self._streams[key]


def sample_arrival(stream: SubStream, lam) -> int:
    """One Bernoulli(lam) draw: 1 when a vehicle arrives this step."""
    p = float(lam)
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"arrival probability must be in [0, 1], got {lam}")
    return 1 if stream.uniform() < p else 0


def sample_route(stream: SubStream, row: dict[str, Fraction]) -> str:
    """Draw a route id from a routing row (route -> probability).

    Routes are walked in sorted id order so the mapping from uniform draw to
    route is deterministic.
    """
    if not row:
        raise ConfigurationError("routing row is empty")
    total = float(sum(Fraction(v) if not isinstance(v, float) else Fraction(str(v))
                      for v in row.values()))
    if abs(total - 1.0) > 1e-12:
        raise ConfigurationError(f"routing row sums to {total}, expected 1")
    u = stream.uniform()
    acc = 0.0
    rids = sorted(row)
    for rid in rids:
        acc += float(row[rid])
        if u < acc:
            return rid
    return rids[-1]


@dataclass(frozen=True)
class DemandSpec:
    """Per-ramp arrival probabilities and routing rows, exact.

    ``lam[ramp]`` is the per-step arrival probability; ``routing[ramp]`` maps
    each of that ramp's routes to its choice probability (row sums to 1).
    """

    lam: dict[str, Fraction]
    routing: dict[str, dict[str, Fraction]]

    @staticmethod
    def build(network: Network, lam, routing) -> "DemandSpec":
        """Validate and convert a raw demand description.

        ``lam`` may be a single value (applied to every ramp) or a per-ramp
        mapping; ``routing`` maps ramp -> route -> fraction.
        """
        if isinstance(lam, dict):
            lam_map = {r: as_fraction(v, f"lam[{r}]") for r, v in lam.items()}
        else:
            common = as_fraction(lam, "lam")
            lam_map = {r: common for r in network.ramps}
        for r in network.ramps:
            if r not in lam_map:
                raise ConfigurationError(f"no arrival probability for ramp {r!r}")
            if not 0 <= lam_map[r] <= 1:
                raise ConfigurationError(f"lam[{r}]={lam_map[r]} outside [0, 1]")
        for r in lam_map:
            if r not in network.ramps:
                raise ConfigurationError(f"lam names unknown ramp {r!r}")

        rout: dict[str, dict[str, Fraction]] = {}
        for r in network.ramps:
            row_raw = routing.get(r)
            if not row_raw:
                raise ConfigurationError(f"no routing row for ramp {r!r}")
            row = {rid: as_fraction(p, f"routing[{r}][{rid}]") for rid, p in row_raw.items()}
            for rid, p in row.items():
                if rid not in network.routes:
                    raise ConfigurationError(f"routing[{r}] names unknown route {rid!r}")
                if network.route_ramp(rid) != r:
                    raise ConfigurationError(
                        f"routing[{r}] names route {rid!r} which starts at "
                        f"{network.route_ramp(rid)!r}"
                    )
                if p < 0:
                    raise ConfigurationError(f"routing[{r}][{rid}]={p} is negative")
            if sum(row.values()) != 1:
                raise ConfigurationError(
                    f"routing row for ramp {r!r} sums to {sum(row.values())}, expected 1"
                )
            rout[r] = row
        for r in routing:
            if r not in network.ramps:
                raise ConfigurationError(f"routing names unknown ramp {r!r}")
        return DemandSpec(lam=lam_map, routing=rout)

    def scaled(self, lam) -> "DemandSpec":
        """Same routing, every arrival probability replaced by ``lam``."""
        common = as_fraction(lam, "lam")
        if not 0 <= common <= 1:
            raise ConfigurationError(f"lam={common} outside [0, 1]")
        return DemandSpec(lam={r: common for r in self.lam}, routing=self.routing)


@dataclass(frozen=True)
class LoadReport:
    """Induced per-node load: expected crossings per step, exact."""

    rho: dict[str, Fraction]
    rho_max: Fraction
    node_max: str


def induced_load(network: Network, demand: DemandSpec) -> LoadReport:
    """Expected crossings per step at every mainline node.

    A route contributes lam * P(route) to each node it crosses, counted once
    per visit (a loop that revisits a node contributes twice there).  Sources
    and sinks are excluded.
    """
    rho: dict[str, Fraction] = {
        nid: Fraction(0)
        for nid, n in network.nodes.items()
        if n.kind not in ("source", "sink")
    }
    for ramp in network.ramps:
        lam = demand.lam[ramp]
        for rid, p in demand.routing[ramp].items():
            w = lam * p
            if w == 0:
                continue
            for nid, _, _ in network.route_node_arrivals(rid):
                rho[nid] += w
    if not rho:
        raise ConfigurationError("network has no mainline nodes")
    node_max = min(nid for nid, v in rho.items() if v == max(rho.values()))
    return LoadReport(rho=rho, rho_max=rho[node_max], node_max=node_max)


class BernoulliDemand:
    """Demand sampler used by the simulators.

    One arrival substream and one route substream per ramp; querying ramps in
    any order cannot perturb another ramp's sequence.
    """

    def __init__(self, network: Network, spec: DemandSpec, base_seed: int):
        self._spec = spec
        self._streams = RngStream(base_seed)
        self._arr = {r: self._streams.substream(r, "arrival") for r in network.ramps}
        self._rte = {r: self._streams.substream(r, "route") for r in network.ramps}
        self._lam = {r: float(v) for r, v in spec.lam.items()}
        # cumulative route table per ramp, sorted by route id
        self._cum: dict[str, list[tuple[float, str]]] = {}
        for r, row in spec.routing.items():
            acc = 0.0
            table = []
            for rid in sorted(row):
                acc += float(row[rid])
                table.append((acc, rid))
            self._cum[r] = table

    def poll(self, ramp: str, step: int) -> str | None:
        """Route id of the vehicle arriving at ``ramp`` this step, or None."""
        if self._arr[ramp].uniform() >= self._lam[ramp]:
            return None
        u = self._rte[ramp].uniform()
        for acc, rid in self._cum[ramp]:
            if u < acc:
                return rid
        return self._cum[ramp][-1][1]


class ScriptedDemand:
    """Deterministic sampler: an explicit (step -> route) table per ramp."""

    def __init__(self, script: dict[str, dict[int, str]]):
        self._script = script

    def poll(self, ramp: str, step: int) -> str | None:
        return self._script.get(ramp, {}).get(step)
