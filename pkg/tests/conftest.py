"""Shared fixtures and small builders for the test suite."""

from __future__ import annotations

from fractions import Fraction

import pytest

from rampsim import (
    DemandSpec,
    Edge,
    Network,
    Node,
    PolicyConfig,
    RampSlots,
    ReleaseSchedule,
    Route,
    derive_constants,
    load_fixture,
)


@pytest.fixture(scope="session")
def constants():
    return derive_constants(1.5, 4, 4.5, 15)


@pytest.fixture(scope="session")
def fig1():
    return load_fixture("fig1")


@pytest.fixture(scope="session")
def fig3a():
    return load_fixture("fig3a")


@pytest.fixture(scope="session")
def fig3b():
    return load_fixture("fig3b")


@pytest.fixture(scope="session")
def ring():
    return load_fixture("ring")


def line_network(slots: int = 3) -> Network:
    """Single ramp feeding one segment that drains to an exit."""
    nodes = [
        Node("src", "source"),
        Node("rn", "on_ramp_node"),
        Node("xn", "off_ramp_node"),
        Node("snk", "sink"),
    ]
    edges = [
        Edge("ra", "src", "rn", "on_ramp"),
        Edge("e1", "rn", "xn", "segment", slot_count=slots),
        Edge("fo", "xn", "snk", "off_ramp"),
    ]
    return Network(nodes, edges, [Route("r1", ("ra", "e1", "fo"))])


def line_demand(net: Network, lam=Fraction(1, 2)) -> DemandSpec:
    return DemandSpec.build(net, lam, {"ra": {"r1": 1}})


def drra_policy(T: int = 3, *, period: int = 1, offsets=(1,),
                non_reactive: bool = False, **kw) -> PolicyConfig:
    sched = ReleaseSchedule(entries={"ra": RampSlots(period, tuple(offsets))})
    return PolicyConfig(kind="drra", T=T, schedule=sched,
                        non_reactive=non_reactive, **kw)


def two_ramp_network() -> Network:
    """Two ramps in series on one mainline, each with its own exit route."""
    nodes = [
        Node("s1", "source"), Node("n1", "on_ramp_node"),
        Node("s2", "source"), Node("n2", "on_ramp_node"),
        Node("x1", "off_ramp_node"), Node("k1", "sink"),
    ]
    edges = [
        Edge("ra1", "s1", "n1", "on_ramp"),
        Edge("ra2", "s2", "n2", "on_ramp"),
        Edge("e1", "n1", "n2", "segment", slot_count=2),
        Edge("e2", "n2", "x1", "segment", slot_count=2),
        Edge("fo1", "x1", "k1", "off_ramp"),
    ]
    routes = [
        Route("r1", ("ra1", "e1", "e2", "fo1")),
        Route("r2", ("ra2", "e2", "fo1")),
    ]
    return Network(nodes, edges, routes)
