"""Scenario files: one JSON document describing a complete experiment.

Schema (all probabilities accept a number, a string like "5/9", or an exact
rational object {"num": 5, "den": 9}):

{
  "name": "...",
  "constants": {"h":, "S0":, "L":, "Vf":, "a_min":, "a_max":},
  "network": {
    "nodes": [{"id", "kind"}],
    "edges": [{"id", "tail", "head", "kind", "slot_count"?, "length_m"?}],
    "routes": [{"id", "edges": [...]}]
  },
  "demand": {"lam": number | {ramp: number}, "routing": {ramp: {route: p}}},
  "policy": {
    "kind": "drra" | "safe_alinea",
    "T": 13, "non_reactive": false,
    "quota_includes_boundary_arrivals": false,
    "schedule": {ramp: {"period": b, "offsets": [..]}},
    "gap": {"T_per_steps", "gamma1", "gamma2", "theta0", "beta"},
    "alinea": {"rate0", "K_r", "target_occ_pct", "period_s",
               "rate_min", "rate_max", "credit_cap", "detector_zone_m"}
  },
  "experiment": {
    "backend": "slot" | "kinematic",
    "horizon_steps": int, "seeds": [int, ...], "probes": [edge, ...],
    "preload": [{"edge", "cell", "route"}],
    "preload_ring": {"count", "speed", "spacing_m"}
  }
}

Parse errors name the offending JSON path.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .constants import SimConstants, as_fraction, derive_constants
from .demand import DemandSpec
from .errors import ConfigurationError
from .network import Edge, Network, Node, Route, ValidationReport, validate
from .schedule import RampSlots, ReleaseSchedule, verify_conflict_free

__all__ = [
    "PolicyConfig",
    "ExperimentConfig",
    "Scenario",
    "parse_scenario",
    "load_scenario",
    "load_fixture",
    "fixture_names",
    "validate_scenario",
    "run_scenario",
    "scenario_hash",
]


def _rational(value, path: str):
    if isinstance(value, dict):
        if set(value) != {"num", "den"}:
            raise ConfigurationError(f"{path}: rational object needs num and den")
        return Fraction(int(value["num"]), int(value["den"]))
    return as_fraction(value, path)


def _req(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigurationError(f"{path}.{key} is missing")
    return d[key]


@dataclass(frozen=True)
class PolicyConfig:
    kind: str
    T: int = 1
    non_reactive: bool = False
    quota_includes_boundary_arrivals: bool = False
    schedule: ReleaseSchedule | None = None
    T_per_steps: int = 2
    gamma1: float = 50.0
    gamma2: float = 10.0
    theta0: float = 0.1
    beta: float = 1.01
    alinea_rate0: float = 900.0
    alinea_K_r: float = 70.0
    alinea_target_occ_pct: float = 13.0
    alinea_period_s: float = 60.0
    alinea_rate_min: float = 0.0
    alinea_rate_max: float = 1800.0
    alinea_credit_cap: float = 2.0
    alinea_detector_zone_m: float = 100.0


@dataclass(frozen=True)
class ExperimentConfig:
    backend: str = "slot"
    horizon_steps: int = 10_000
    seeds: tuple[int, ...] = (0,)
    probes: tuple[str, ...] = ()


@dataclass
class Scenario:
    name: str
    constants: SimConstants
    network: Network
    demand: DemandSpec
    policy: PolicyConfig
    experiment: ExperimentConfig
    preload: tuple = ()
    preload_ring: dict | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def with_lambda(self, lam) -> "Scenario":
        """Same scenario with every arrival probability set to ``lam``."""
        return replace(self, demand=self.demand.scaled(lam))

    def with_policy_kind(self, kind: str) -> "Scenario":
        if kind not in ("drra", "safe_alinea"):
            raise ConfigurationError(f"unknown policy kind {kind!r}")
        return replace(self, policy=replace(self.policy, kind=kind))

    def with_non_reactive(self, flag: bool = True) -> "Scenario":
        return replace(self, policy=replace(self.policy, non_reactive=flag))


def parse_scenario(doc: dict, name: str = "scenario") -> Scenario:
    if not isinstance(doc, dict):
        raise ConfigurationError("scenario document must be a JSON object")
    name = doc.get("name", name)

    c = _req(doc, "constants", name)
    constants = derive_constants(
        _req(c, "h", "constants"), _req(c, "S0", "constants"),
        _req(c, "L", "constants"), _req(c, "Vf", "constants"),
        c.get("a_min", -4), c.get("a_max", 2),
    )

    net = _req(doc, "network", name)
    nodes = []
    for i, nd in enumerate(_req(net, "nodes", "network")):
        nodes.append(Node(str(_req(nd, "id", f"network.nodes[{i}]")),
                          str(_req(nd, "kind", f"network.nodes[{i}]"))))
    edges = []
    for i, ed in enumerate(_req(net, "edges", "network")):
        p = f"network.edges[{i}]"
        slot_count = ed.get("slot_count")
        if slot_count is not None:
            slot_count = int(slot_count)
        length_m = ed.get("length_m")
        if length_m is not None:
            length_m = float(length_m)
        edges.append(Edge(str(_req(ed, "id", p)), str(_req(ed, "tail", p)),
                          str(_req(ed, "head", p)), str(_req(ed, "kind", p)),
                          slot_count=slot_count, length_m=length_m))
    routes = []
    for i, rt in enumerate(net.get("routes", [])):
        p = f"network.routes[{i}]"
        routes.append(Route(str(_req(rt, "id", p)),
                            tuple(str(e) for e in _req(rt, "edges", p))))
    network = Network(nodes, edges, routes)

    dm = _req(doc, "demand", name)
    lam_raw = _req(dm, "lam", "demand")
    if isinstance(lam_raw, dict) and not set(lam_raw) <= {"num", "den"}:
        lam = {r: _rational(v, f"demand.lam[{r}]") for r, v in lam_raw.items()}
    else:
        lam = _rational(lam_raw, "demand.lam")
    routing_raw = _req(dm, "routing", "demand")
    routing = {
        r: {rid: _rational(p, f"demand.routing[{r}][{rid}]")
            for rid, p in row.items()}
        for r, row in routing_raw.items()
    }
    demand = DemandSpec.build(network, lam, routing)

    pol = _req(doc, "policy", name)
    kind = str(_req(pol, "kind", "policy"))
    schedule = None
    if "schedule" in pol and pol["schedule"] is not None:
        entries = {}
        for r, ent in pol["schedule"].items():
            p = f"policy.schedule[{r}]"
            entries[r] = RampSlots(int(_req(ent, "period", p)),
                                   tuple(int(n) for n in _req(ent, "offsets", p)))
        schedule = ReleaseSchedule(entries)
    gap = pol.get("gap", {})
    al = pol.get("alinea", {})
    policy = PolicyConfig(
        kind=kind,
        T=int(pol.get("T", 1)),
        non_reactive=bool(pol.get("non_reactive", False)),
        quota_includes_boundary_arrivals=bool(
            pol.get("quota_includes_boundary_arrivals", False)),
        schedule=schedule,
        T_per_steps=int(gap.get("T_per_steps", 2)),
        gamma1=float(gap.get("gamma1", 50.0)),
        gamma2=float(gap.get("gamma2", 10.0)),
        theta0=float(gap.get("theta0", 0.1)),
        beta=float(gap.get("beta", 1.01)),
        alinea_rate0=float(al.get("rate0", 900.0)),
        alinea_K_r=float(al.get("K_r", 70.0)),
        alinea_target_occ_pct=float(al.get("target_occ_pct", 13.0)),
        alinea_period_s=float(al.get("period_s", 60.0)),
        alinea_rate_min=float(al.get("rate_min", 0.0)),
        alinea_rate_max=float(al.get("rate_max", 1800.0)),
        alinea_credit_cap=float(al.get("credit_cap", 2.0)),
        alinea_detector_zone_m=float(al.get("detector_zone_m", 100.0)),
    )

    ex = doc.get("experiment", {})
    experiment = ExperimentConfig(
        backend=str(ex.get("backend", "slot")),
        horizon_steps=int(ex.get("horizon_steps", 10_000)),
        seeds=tuple(int(s) for s in ex.get("seeds", [0])),
        probes=tuple(str(p) for p in ex.get("probes", [])),
    )
    if experiment.backend not in ("slot", "kinematic"):
        raise ConfigurationError(
            f"experiment.backend must be slot or kinematic, got {experiment.backend!r}"
        )
    preload = tuple(
        (str(_req(pl, "edge", f"experiment.preload[{i}]")),
         int(_req(pl, "cell", f"experiment.preload[{i}]")),
         str(_req(pl, "route", f"experiment.preload[{i}]")))
        for i, pl in enumerate(ex.get("preload", []))
    )
    preload_ring = ex.get("preload_ring")
    if preload_ring is not None:
        preload_ring = {
            "count": int(_req(preload_ring, "count", "experiment.preload_ring")),
            "speed": float(_req(preload_ring, "speed", "experiment.preload_ring")),
            "spacing_m": float(_req(preload_ring, "spacing_m", "experiment.preload_ring")),
        }

    return Scenario(name=name, constants=constants, network=network,
                    demand=demand, policy=policy, experiment=experiment,
                    preload=preload, preload_ring=preload_ring, raw=doc)


def load_scenario(path) -> Scenario:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{p}: not valid JSON: {exc}") from exc
    return parse_scenario(doc, name=p.stem)


def fixture_names() -> list[str]:
    root = resources.files("rampsim.fixtures")
    return sorted(f.name[:-5] for f in root.iterdir() if f.name.endswith(".json"))


def load_fixture(name: str) -> Scenario:
    root = resources.files("rampsim.fixtures")
    f = root / f"{name}.json"
    if not f.is_file():
        raise ConfigurationError(
            f"unknown fixture {name!r}; available: {', '.join(fixture_names())}"
        )
    return parse_scenario(json.loads(f.read_text()), name=name)


def validate_scenario(scenario: Scenario) -> ValidationReport:
    """Network structure, demand wiring, schedule soundness, backend fit."""
    rep = validate(scenario.network, scenario.constants)
    pol = scenario.policy
    if pol.kind == "drra":
        if pol.schedule is None:
            rep.add("policy", "schedule", "drra policy declares no schedule")
        else:
            try:
                witness = verify_conflict_free(scenario.network, pol.schedule)
            except ConfigurationError as exc:
                rep.add("policy", "schedule", str(exc))
            else:
                if witness is not None:
                    rep.add("schedule-conflict", witness.node,
                            json.dumps(witness.as_dict(), sort_keys=True))
        if pol.T < 1:
            rep.add("policy", "T", f"cycle length must be >= 1, got {pol.T}")
    elif pol.kind == "safe_alinea":
        if scenario.experiment.backend == "slot":
            merges = [n.id for n in scenario.network.nodes.values()
                      if n.kind == "merge_node"]
            if merges:
                rep.add("policy", "alinea",
                        f"safe_alinea on the slot backend needs a merge-free "
                        f"network; found merge nodes {merges}")
    else:
        rep.add("policy", "kind", f"unknown policy kind {pol.kind!r}")
    if scenario.experiment.backend == "kinematic":
        for e in scenario.network.edges.values():
            if e.kind == "segment" and (e.length_m is None or e.length_m <= 0):
                rep.add("backend", e.id,
                        "kinematic backend needs length_m on every segment")
    for probe in scenario.experiment.probes:
        e = scenario.network.edges.get(probe)
        if e is None or e.kind != "segment":
            rep.add("probe", probe, "probe must name a segment edge")
    return rep


def run_scenario(scenario: Scenario, horizon: int | None = None,
                 seed: int | None = None, backend: str | None = None, **options):
    """Dispatch one run to the configured backend.

    Returns (trace, metrics); their concrete types differ per backend but
    share queue arrays, tau, and vehicle logs.
    """
    backend = backend or scenario.experiment.backend
    horizon = horizon if horizon is not None else scenario.experiment.horizon_steps
    seed = seed if seed is not None else scenario.experiment.seeds[0]
    if backend == "slot":
        from . import slotsim

        if scenario.experiment.probes and "probes" not in options:
            options["probes"] = scenario.experiment.probes
        return slotsim.run(scenario, horizon, seed, **options)
    if backend == "kinematic":
        from . import kinematic

        return kinematic.run(scenario, horizon, seed, **options)
    raise ConfigurationError(f"unknown backend {backend!r}")


def scenario_hash(scenario: Scenario) -> str:
    """Stable digest of the source document, for run manifests."""
    blob = json.dumps(scenario.raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
