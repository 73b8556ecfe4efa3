"""Slot-based freeway simulation with conflict-free ramp metering.

The package models a freeway network as fixed-size moving slots, meters
on-ramps with periodic release schedules plus local safety checks, and
ships the analysis tools used to study that policy: exact admissible-rate
bounds, empirical stability boundaries, drift diagnostics, and a
continuous car-following twin for gap-rule experiments.
"""

from .analysis import (
    BoundaryEstimate,
    DriftStats,
    degree_bound,
    enumerate_U,
    estimate_boundary,
    family_union,
    inner_bound,
    lyapunov_drift,
    node_degrees,
    outer_bound,
    queue_slope,
    ttt,
    ttt_series,
)
from .constants import SimConstants, as_fraction, derive_constants
from .demand import (
    BernoulliDemand,
    DemandSpec,
    RngStream,
    ScriptedDemand,
    induced_load,
)
from .errors import (
    BracketError,
    CollisionError,
    ConfigurationError,
    ContractViolation,
    CyclicNetworkError,
    InsufficientTrips,
    ParameterError,
    RampSimError,
)
from .kinematic import (
    KinParams,
    KinSim,
    controller_accel,
    predict_merge,
    safety_distance,
)
from .network import (
    Edge,
    Network,
    Node,
    Route,
    ValidationReport,
    crossing_steps,
    route_contains_merge,
    validate,
)
from .policy import (
    AlineaState,
    Decision,
    DrraState,
    GapState,
    LocalView,
    alinea_accrue,
    alinea_update,
    drra_begin_cycle,
    drra_decide,
    drra_note_release,
    gap_update,
)
from .scenario import (
    ExperimentConfig,
    PolicyConfig,
    Scenario,
    fixture_names,
    load_fixture,
    load_scenario,
    parse_scenario,
    run_scenario,
    scenario_hash,
    validate_scenario,
)
from .schedule import (
    ConflictWitness,
    RampSlots,
    ReleaseSchedule,
    find_offsets,
    verify_conflict_free,
)
from .slotsim import SlotSim, crossing_rate

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AlineaState", "BernoulliDemand", "BoundaryEstimate", "BracketError",
    "CollisionError", "ConfigurationError", "ConflictWitness",
    "ContractViolation", "CyclicNetworkError", "Decision", "DemandSpec",
    "DriftStats", "DrraState", "Edge", "ExperimentConfig", "GapState",
    "InsufficientTrips", "KinParams", "KinSim", "LocalView", "Network",
    "Node", "ParameterError", "PolicyConfig", "RampSimError", "RampSlots",
    "ReleaseSchedule", "RngStream", "Route", "Scenario", "ScriptedDemand",
    "SimConstants", "SlotSim", "ValidationReport",
    "alinea_accrue", "alinea_update", "as_fraction", "controller_accel",
    "crossing_rate", "crossing_steps", "degree_bound", "derive_constants",
    "drra_begin_cycle", "drra_decide", "drra_note_release", "enumerate_U",
    "estimate_boundary", "family_union", "find_offsets", "fixture_names",
    "gap_update", "induced_load", "inner_bound", "load_fixture",
    "load_scenario", "lyapunov_drift", "node_degrees", "outer_bound",
    "parse_scenario", "predict_merge", "queue_slope", "route_contains_merge",
    "run_scenario", "safety_distance", "scenario_hash", "ttt", "ttt_series",
    "validate", "validate_scenario", "verify_conflict_free",
]
