import random

import pytest

import oracles
from conftest import line_network, two_ramp_network
from rampsim import (
    ConfigurationError,
    Edge,
    Network,
    Node,
    Route,
    crossing_steps,
    derive_constants,
    route_contains_merge,
    validate,
)


def codes(report):
    return {v.code for v in report.violations}


# -- construction ------------------------------------------------------------


def test_duplicate_ids_rejected():
    n = [Node("a", "source"), Node("b", "on_ramp_node")]
    with pytest.raises(ConfigurationError, match="duplicate node"):
        Network(n + [Node("a", "sink")], [])
    e = [Edge("ra", "a", "b", "on_ramp")]
    with pytest.raises(ConfigurationError, match="duplicate edge"):
        Network(n, e + [Edge("ra", "a", "b", "on_ramp")])
    with pytest.raises(ConfigurationError, match="unknown node"):
        Network(n, [Edge("ra", "a", "zzz", "on_ramp")])
    with pytest.raises(ConfigurationError, match="unknown edge"):
        Network(n, e, [Route("r", ("ra", "nope"))])
    with pytest.raises(ConfigurationError, match="duplicate route"):
        Network(n, e, [Route("r", ("ra",)), Route("r", ("ra",))])


def test_line_is_valid():
    net = line_network()
    rep = validate(net, derive_constants(1.5, 4, 4.5, 15))
    assert rep.ok
    assert str(rep) == "ok"
    assert net.ramps == ["ra"]
    assert net.ramp_node == {"ra": "rn"}


# -- validation codes --------------------------------------------------------


def test_kind_and_slot_count_codes():
    net = Network(
        [Node("a", "blob"), Node("b", "on_ramp_node"), Node("c", "off_ramp_node")],
        [
            Edge("ra", "a", "b", "escalator"),
            Edge("e1", "b", "c", "segment"),
            Edge("fo", "c", "a", "off_ramp", slot_count=3),
        ],
    )
    got = codes(validate(net))
    assert "node-kind" in got
    assert "edge-kind" in got
    assert "slot-count" in got  # both the missing and the forbidden variant
    msgs = [v for v in validate(net).violations if v.code == "slot-count"]
    assert len(msgs) == 2


def test_length_mismatch_needs_constants():
    c = derive_constants(1.5, 4, 4.5, 15)  # spacing 31 m
    nodes = [Node("s", "source"), Node("rn", "on_ramp_node"),
             Node("xn", "off_ramp_node"), Node("k", "sink")]

    def with_length(length):
        return Network(nodes, [
            Edge("ra", "s", "rn", "on_ramp"),
            Edge("e1", "rn", "xn", "segment", slot_count=3, length_m=length),
            Edge("fo", "xn", "k", "off_ramp"),
        ])

    assert validate(with_length(93.0), c).ok
    assert validate(with_length(101.0), c).ok  # within half a spacing
    assert "length-mismatch" in codes(validate(with_length(124.0), c))
    assert "length-mismatch" in codes(validate(with_length(110.0), c))
    # without constants the declared length is not checked
    assert validate(with_length(124.0)).ok


def test_endpoint_shape_codes():
    nodes = [
        Node("s", "source"), Node("rn", "on_ramp_node"),
        Node("xn", "off_ramp_node"), Node("k", "sink"),
        Node("m", "merge_node"), Node("d", "diverge_node"),
    ]
    net = Network(nodes, [
        # on-ramp drawn backwards and an off-ramp out of a source
        Edge("ra", "rn", "s", "on_ramp"),
        Edge("fo", "s", "k", "off_ramp"),
        Edge("e1", "d", "m", "segment", slot_count=1),
        Edge("e2", "k", "d", "segment", slot_count=1),
    ])
    got = codes(validate(net))
    assert {"ramp-endpoints", "offramp-endpoints", "source-shape",
            "sink-shape", "ramp-node-shape", "offramp-node-shape",
            "merge-shape", "diverge-shape"} <= got


def test_shared_ramp_node_flagged():
    nodes = [Node("s1", "source"), Node("s2", "source"),
             Node("rn", "on_ramp_node"), Node("xn", "off_ramp_node"),
             Node("k", "sink")]
    net = Network(nodes, [
        Edge("ra1", "s1", "rn", "on_ramp"),
        Edge("ra2", "s2", "rn", "on_ramp"),
        Edge("e1", "rn", "xn", "segment", slot_count=2),
        Edge("fo", "xn", "k", "off_ramp"),
    ])
    got = codes(validate(net))
    assert "ramp-node-shared" in got
    assert "ramp-node-shape" in got  # two incoming on-ramps


def test_route_codes():
    net = line_network()
    bad = Network(
        list(net.nodes.values()),
        list(net.edges.values()),
        [
            Route("short", ("ra",)),
            Route("startwrong", ("e1", "fo")),
            Route("gap", ("ra", "fo")),
        ],
    )
    rep = validate(bad)
    got = codes(rep)
    assert "route-shape" in got
    assert "route-broken" in got
    by_subject = {v.subject for v in rep.violations}
    assert {"short", "startwrong", "gap"} <= by_subject


# -- structure queries -------------------------------------------------------


def test_fig1_upstream_map(fig1):
    net = fig1.network
    assert net.ramps == ["ra1", "ra2", "ra3", "ra4"]
    assert net.upstream_ramps("ra1") == ()
    assert net.upstream_ramps("ra2") == ("ra1",)
    assert net.upstream_ramps("ra3") == ("ra1",)
    assert net.upstream_ramps("ra4") == ("ra2", "ra3")
    assert net.downstream_ramps("ra1") == ("ra2", "ra3")
    assert net.downstream_ramps("ra4") == ()
    assert net.acyclic


def test_ring_upstream_map(ring):
    net = ring.network
    assert not net.acyclic
    assert net.upstream_ramps("ra1") == ("ra3",)
    assert net.upstream_ramps("ra2") == ("ra1",)
    assert net.upstream_ramps("ra3") == ("ra2",)


def test_fig1_route_arrivals(fig1):
    net = fig1.network
    assert net.route_node_arrivals("q2") == [
        ("r2n", 0, "ra2"), ("m", 5, "e4"), ("r4n", 10, "e6"), ("on", 15, "e7"),
    ]
    assert crossing_steps(net, "q1a", "m") == 15
    assert crossing_steps(net, "q1a", "r1n") == 0
    with pytest.raises(ConfigurationError, match="not on route"):
        crossing_steps(net, "q4", "m")


def test_merge_detection(fig3a, fig1):
    net = fig3a.network
    assert not route_contains_merge(net, "p11")
    assert route_contains_merge(net, "p13")
    assert not route_contains_merge(fig1.network, "q4")
    # a route is merge-crossing when it passes any other ramp's entry node
    assert route_contains_merge(fig1.network, "q2")


def test_ring_routes_revisit_entry(ring):
    net = ring.network
    # p31 passes ra1's node, so it merges even though no merge_node exists
    assert route_contains_merge(net, "p31")
    assert crossing_steps(net, "p31", "r1n") == 21


def test_missing_slot_count_on_route():
    net = Network(
        [Node("s", "source"), Node("rn", "on_ramp_node"),
         Node("xn", "off_ramp_node"), Node("k", "sink")],
        [Edge("ra", "s", "rn", "on_ramp"),
         Edge("e1", "rn", "xn", "segment"),
         Edge("fo", "xn", "k", "off_ramp")],
        [Route("r1", ("ra", "e1", "fo"))],
    )
    with pytest.raises(ConfigurationError, match="slot_count"):
        net.route_node_arrivals("r1")
    with pytest.raises(ConfigurationError, match="unknown route"):
        net.route_node_arrivals("zzz")
    with pytest.raises(ConfigurationError, match="unknown ramp"):
        net.upstream_ramps("zzz")


def test_two_ramp_series():
    net = two_ramp_network()
    assert validate(net).ok
    assert net.upstream_ramps("ra2") == ("ra1",)
    assert net.route_node_arrivals("r1")[-1] == ("x1", 4, "e2")


# -- fixtures and generators -------------------------------------------------


@pytest.mark.parametrize("name", ["fig1", "fig3a", "fig3b", "ring"])
def test_fixture_networks_valid(name, request):
    scn = request.getfixturevalue(name)
    assert validate(scn.network, scn.constants).ok


def test_random_corridors_are_valid():
    for seed in range(150):
        rng = random.Random(seed)
        net, ramps = oracles.random_corridor(rng)
        rep = validate(net)
        assert rep.ok, f"seed {seed}: {rep}"
        assert ramps
        for r in ramps:
            assert net.routes_from(r)


def test_random_dags_match_declared_predecessors():
    for seed in range(100):
        rng = random.Random(seed)
        n = rng.randint(1, 5)
        net, declared = oracles.random_ramp_dag(rng, n)
        assert validate(net).ok, f"seed {seed}: {validate(net)}"
        assert net.acyclic
        for r, want in declared.items():
            assert set(net.upstream_ramps(r)) == want, f"seed {seed}, ramp {r}"
