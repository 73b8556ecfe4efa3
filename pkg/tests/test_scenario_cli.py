"""Scenario documents and the command-line front end."""

from __future__ import annotations

import csv
import json
import xml.etree.ElementTree as ET
from fractions import Fraction

import pytest

from rampsim import (
    ConfigurationError,
    RampSimError,
    fixture_names,
    load_fixture,
    load_scenario,
    parse_scenario,
    run_scenario,
    scenario_hash,
    validate_scenario,
)
from rampsim.cli import main


def line_doc(**over) -> dict:
    doc = {
        "name": "tline",
        "constants": {"h": 1.5, "S0": 4, "L": 4.5, "Vf": 15},
        "network": {
            "nodes": [
                {"id": "src", "kind": "source"},
                {"id": "rn", "kind": "on_ramp_node"},
                {"id": "xn", "kind": "off_ramp_node"},
                {"id": "snk", "kind": "sink"},
            ],
            "edges": [
                {"id": "ra", "tail": "src", "head": "rn", "kind": "on_ramp"},
                {"id": "e1", "tail": "rn", "head": "xn", "kind": "segment",
                 "slot_count": 3, "length_m": 93},
                {"id": "fo", "tail": "xn", "head": "snk", "kind": "off_ramp"},
            ],
            "routes": [{"id": "r1", "edges": ["ra", "e1", "fo"]}],
        },
        "demand": {"lam": "1/5", "routing": {"ra": {"r1": 1}}},
        "policy": {"kind": "drra", "T": 3,
                   "schedule": {"ra": {"period": 1, "offsets": [1]}}},
        "experiment": {"backend": "slot", "horizon_steps": 60, "seeds": [7],
                       "probes": ["e1"]},
    }
    doc.update(over)
    return doc


def y_doc(offsets1=(1,), offsets2=(1,), period=1) -> dict:
    """Two ramps feeding one merge; equal crossings clash unless offset."""
    return {
        "name": "ty",
        "constants": {"h": 1.5, "S0": 4, "L": 4.5, "Vf": 15},
        "network": {
            "nodes": [
                {"id": "s1", "kind": "source"}, {"id": "h1", "kind": "on_ramp_node"},
                {"id": "s2", "kind": "source"}, {"id": "h2", "kind": "on_ramp_node"},
                {"id": "m", "kind": "merge_node"},
                {"id": "xn", "kind": "off_ramp_node"}, {"id": "snk", "kind": "sink"},
            ],
            "edges": [
                {"id": "ra1", "tail": "s1", "head": "h1", "kind": "on_ramp"},
                {"id": "ra2", "tail": "s2", "head": "h2", "kind": "on_ramp"},
                {"id": "e1", "tail": "h1", "head": "m", "kind": "segment", "slot_count": 2},
                {"id": "e2", "tail": "h2", "head": "m", "kind": "segment", "slot_count": 2},
                {"id": "e3", "tail": "m", "head": "xn", "kind": "segment", "slot_count": 2},
                {"id": "fo", "tail": "xn", "head": "snk", "kind": "off_ramp"},
            ],
            "routes": [
                {"id": "r1", "edges": ["ra1", "e1", "e3", "fo"]},
                {"id": "r2", "edges": ["ra2", "e2", "e3", "fo"]},
            ],
        },
        "demand": {"lam": 0.2,
                   "routing": {"ra1": {"r1": 1}, "ra2": {"r2": 1}}},
        "policy": {"kind": "drra", "T": 3, "schedule": {
            "ra1": {"period": period, "offsets": list(offsets1)},
            "ra2": {"period": period, "offsets": list(offsets2)},
        }},
        "experiment": {"backend": "slot", "horizon_steps": 40, "seeds": [0]},
    }


def write_doc(tmp_path, doc, name="scn.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


# -- parsing --------------------------------------------------------------------------


def test_parse_scenario_roundtrip():
    doc = line_doc()
    sc = parse_scenario(doc)
    assert sc.name == "tline"
    assert sc.constants.tau == Fraction(31, 15)
    assert sc.demand.lam["ra"] == Fraction(1, 5)
    assert sc.policy.kind == "drra" and sc.policy.T == 3
    assert sc.policy.schedule["ra"].offsets == (1,)
    assert sc.experiment.backend == "slot"
    assert sc.experiment.seeds == (7,) and sc.experiment.probes == ("e1",)
    assert sc.preload == () and sc.preload_ring is None
    assert sc.raw is doc


def test_parse_scenario_defaults():
    doc = line_doc()
    del doc["name"]
    del doc["experiment"]
    sc = parse_scenario(doc, name="fallback")
    assert sc.name == "fallback"
    assert sc.experiment.backend == "slot"
    assert sc.experiment.horizon_steps == 10_000
    assert sc.experiment.seeds == (0,)


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d.pop("constants"), r"constants is missing"),
    (lambda d: d["constants"].pop("Vf"), r"constants\.Vf is missing"),
    (lambda d: d["network"]["nodes"][0].pop("id"), r"network\.nodes\[0\]\.id"),
    (lambda d: d["network"]["edges"][1].pop("head"), r"network\.edges\[1\]\.head"),
    (lambda d: d["network"]["routes"][0].pop("edges"), r"network\.routes\[0\]\.edges"),
    (lambda d: d["demand"].pop("lam"), r"demand\.lam is missing"),
    (lambda d: d["demand"].update(lam={"num": 1}), r"rational object"),
    (lambda d: d["demand"].update(lam="one half"), r"demand\.lam"),
    (lambda d: d["policy"]["schedule"]["ra"].pop("offsets"),
     r"policy\.schedule\[ra\]\.offsets"),
    (lambda d: d["experiment"].update(backend="teleport"),
     r"backend must be slot or kinematic"),
    (lambda d: d["experiment"].update(preload=[{"edge": "e1"}]),
     r"experiment\.preload\[0\]\.cell"),
])
def test_parse_errors_name_their_path(mutate, path):
    doc = line_doc()
    mutate(doc)
    with pytest.raises(RampSimError, match=path):
        parse_scenario(doc)


def test_parse_rejects_non_object():
    with pytest.raises(ConfigurationError, match="JSON object"):
        parse_scenario([1, 2, 3])


def test_load_scenario_file_handling(tmp_path):
    p = write_doc(tmp_path, line_doc(), "renamed.json")
    sc = load_scenario(p)
    assert sc.name == "tline"  # an embedded name wins over the file stem
    doc = line_doc()
    del doc["name"]
    sc = load_scenario(write_doc(tmp_path, doc, "stem.json"))
    assert sc.name == "stem"
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigurationError, match="not valid JSON"):
        load_scenario(bad)


def test_fixture_catalog():
    assert fixture_names() == ["fig1", "fig3a", "fig3b", "ring"]
    assert load_fixture("fig1").name == "fig1"
    with pytest.raises(ConfigurationError, match="unknown fixture"):
        load_fixture("fig9")


# -- scenario-level validation --------------------------------------------------------


def test_validate_clean_scenario():
    assert validate_scenario(parse_scenario(line_doc())).ok


def test_validate_embeds_schedule_conflict():
    rep = validate_scenario(parse_scenario(y_doc()))
    assert not rep.ok
    conflicts = [v for v in rep.violations if v.code == "schedule-conflict"]
    assert len(conflicts) == 1
    v = conflicts[0]
    assert v.subject == "m"
    witness = json.loads(v.message)
    assert witness["node"] == "m"
    assert witness["event1"]["ramp"] == "ra1"
    assert witness["event2"]["ramp"] == "ra2"
    # out-of-phase offsets on period two clear the same geometry
    assert validate_scenario(parse_scenario(y_doc((1,), (2,), period=2))).ok


def test_validate_policy_requirements():
    doc = line_doc()
    del doc["policy"]["schedule"]
    rep = validate_scenario(parse_scenario(doc))
    assert any(v.code == "policy" and "no schedule" in v.message
               for v in rep.violations)
    doc = line_doc()
    doc["policy"]["T"] = 0
    rep = validate_scenario(parse_scenario(doc))
    assert any("cycle length" in v.message for v in rep.violations)
    doc = line_doc()
    doc["policy"] = {"kind": "mystery"}
    rep = validate_scenario(parse_scenario(doc))
    assert any("unknown policy kind" in v.message for v in rep.violations)


def test_validate_alinea_backend_rules():
    doc = y_doc()
    doc["policy"] = {"kind": "safe_alinea"}
    rep = validate_scenario(parse_scenario(doc))
    assert any("merge-free" in v.message for v in rep.violations)
    # the continuous backend handles merges, but then needs lengths
    doc["experiment"]["backend"] = "kinematic"
    rep = validate_scenario(parse_scenario(doc))
    assert not any("merge-free" in v.message for v in rep.violations)
    lengthless = [v for v in rep.violations if v.code == "backend"]
    assert {v.subject for v in lengthless} == {"e1", "e2", "e3"}


def test_validate_probes_must_be_segments():
    doc = line_doc()
    doc["experiment"]["probes"] = ["ra", "ghost"]
    rep = validate_scenario(parse_scenario(doc))
    assert [v.subject for v in rep.violations if v.code == "probe"] \
        == ["ra", "ghost"]


# -- scenario helpers -----------------------------------------------------------------


def test_with_lambda_and_policy_helpers():
    sc = parse_scenario(line_doc())
    at3 = sc.with_lambda(Fraction(3, 10))
    assert at3.demand.lam["ra"] == Fraction(3, 10)
    assert sc.demand.lam["ra"] == Fraction(1, 5)  # original untouched
    al = sc.with_policy_kind("safe_alinea")
    assert al.policy.kind == "safe_alinea"
    assert al.policy.schedule is not None  # schedule survives the swap
    with pytest.raises(ConfigurationError, match="unknown policy kind"):
        sc.with_policy_kind("mystery")
    assert sc.with_non_reactive().policy.non_reactive is True
    assert sc.with_non_reactive(False).policy.non_reactive is False


def test_scenario_hash_is_content_stable():
    a = scenario_hash(parse_scenario(line_doc()))
    b = scenario_hash(parse_scenario(json.loads(json.dumps(line_doc()))))
    assert a == b and len(a) == 64
    changed = line_doc()
    changed["experiment"]["horizon_steps"] = 61
    assert scenario_hash(parse_scenario(changed)) != a


def test_run_scenario_dispatch():
    sc = parse_scenario(line_doc())
    trace, metrics = run_scenario(sc)
    assert trace.steps == 60 and metrics.seed == 7
    assert "e1" in trace.probe_counts  # experiment probes forwarded
    trace, _ = run_scenario(sc, probes=())
    assert trace.probe_counts == {}
    ktrace, kmetrics = run_scenario(sc, horizon=10, seed=1, backend="kinematic")
    assert hasattr(ktrace, "xf_series") and kmetrics["horizon"] == 10
    with pytest.raises(ConfigurationError, match="unknown backend"):
        run_scenario(sc, backend="abacus")


# -- command line ---------------------------------------------------------------------


def test_cli_validate(tmp_path, capsys):
    assert main(["validate", write_doc(tmp_path, line_doc())]) == 0
    assert "ok" in capsys.readouterr().out
    assert main(["validate", write_doc(tmp_path, y_doc())]) == 1
    assert "schedule-conflict" in capsys.readouterr().out
    assert main(["validate", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    assert main(["validate", str(bad)]) == 2
    assert "not valid JSON" in capsys.readouterr().err


def test_cli_bounds(tmp_path, capsys):
    path = write_doc(tmp_path, load_fixture("fig3a").raw, "fig3a.json")
    assert main(["bounds", path]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["inner"] == {"num": 1, "den": 2}
    assert doc["outer"] == {"num": 5, "den": 9}
    assert doc["inner_float"] == pytest.approx(0.5)
    assert doc["outer_float"] == pytest.approx(5 / 9)


def test_cli_schedule_check(tmp_path, capsys):
    clean = write_doc(tmp_path, y_doc((1,), (2,), period=2), "clean.json")
    assert main(["schedule-check", clean]) == 0
    assert json.loads(capsys.readouterr().out) == {"conflict_free": True}

    clash = write_doc(tmp_path, y_doc(), "clash.json")
    assert main(["schedule-check", clash]) == 1
    doc = json.loads(capsys.readouterr().out)
    assert doc["conflict_free"] is False and doc["witness"]["node"] == "m"

    # same geometry and counts, but the search is free to move the offsets
    movable = write_doc(tmp_path, y_doc((1,), (1,), period=2), "movable.json")
    assert main(["schedule-check", movable, "--search"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["found"] is True and set(doc["schedule"]) == {"ra1", "ra2"}
    assert main(["schedule-check", clash, "--search"]) == 1
    assert json.loads(capsys.readouterr().out) == {"found": False}

    nosched = line_doc()
    nosched["policy"] = {"kind": "safe_alinea"}
    assert main(["schedule-check", write_doc(tmp_path, nosched, "ns.json")]) == 2
    assert "no release schedule" in capsys.readouterr().err


def test_cli_schedule_check_strict_entries(tmp_path, capsys):
    # the entry step itself clashes only under the strict reading
    path = write_doc(tmp_path, load_fixture("fig3b").raw, "fig3b.json")
    assert main(["schedule-check", path]) == 0
    capsys.readouterr()
    assert main(["schedule-check", path, "--strict"]) == 1
    doc = json.loads(capsys.readouterr().out)
    assert doc["witness"]["node"] == "r1n"


def test_cli_run_writes_artifacts(tmp_path, capsys):
    scn = write_doc(tmp_path, line_doc())
    out = tmp_path / "out"
    assert main(["run", scn, "--horizon", "40", "--out", str(out)]) == 0
    assert "wrote" in capsys.readouterr().out

    with open(out / "queues.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["step", "time_s", "queue_total", "queue_ra"]
    assert len(rows) == 42  # header + horizon + initial row
    assert rows[1][:3] == ["0", "0.0", "0"]

    with open(out / "vehicles.csv", newline="") as fh:
        vrows = list(csv.reader(fh))
    assert vrows[0] == ["vid", "ramp", "route", "arrive_step",
                        "release_step", "exit_step"]
    assert len(vrows) > 1

    metrics = json.loads((out / "metrics.json").read_text())
    assert {"horizon", "seed", "arrivals", "releases", "exits",
            "final_queue", "hold_reasons"} <= set(metrics)
    assert metrics["seed"] == 7  # from the scenario's experiment block

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["scenario"] == "tline"
    assert manifest["scenario_sha256"] == scenario_hash(parse_scenario(line_doc()))
    assert manifest["backend"] == "slot" and manifest["policy"] == "drra"
    assert manifest["horizon_steps"] == 40 and manifest["seed"] == 7
    assert {"command", "package_version", "python", "numpy",
            "created_utc"} <= set(manifest)


def test_cli_run_kinematic_and_policy_override(tmp_path):
    scn = write_doc(tmp_path, line_doc())
    out = tmp_path / "kout"
    assert main(["run", scn, "--horizon", "30", "--backend", "kinematic",
                 "--policy", "safe_alinea", "--out", str(out)]) == 0
    with open(out / "vehicles.csv", newline="") as fh:
        header = next(csv.reader(fh))
    assert header == ["vid", "ramp", "route", "arrive_s", "release_s", "exit_s"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["backend"] == "kinematic"
    assert manifest["policy"] == "safe_alinea"


def test_cli_run_rejects_invalid_scenario(tmp_path, capsys):
    assert main(["run", write_doc(tmp_path, y_doc()), "--out",
                 str(tmp_path / "never")]) == 1
    assert "schedule-conflict" in capsys.readouterr().err
    assert not (tmp_path / "never").exists()


def test_cli_boundary(tmp_path, capsys):
    doc = line_doc()
    doc["policy"]["schedule"]["ra"] = {"period": 4, "offsets": [1]}
    scn = write_doc(tmp_path, doc)
    out = tmp_path / "bout"
    code = main(["boundary", scn, "--lo", "0.1", "--hi", "0.6",
                 "--seeds", "2", "--horizon", "600", "--resolution", "0.2",
                 "--out", str(out), "--verbose"])
    assert code == 0
    captured = capsys.readouterr()
    got = json.loads(captured.out.strip().splitlines()[-1])
    # release rate one quarter: the boundary lands between the brackets
    assert 0.1 < got["lo"] <= got["lambda_star"] <= got["hi"] < 0.6
    assert "lambda=" in captured.err  # verbose progress lines
    saved = json.loads((out / "boundary.json").read_text())
    assert saved["lambda_star"] == got["lambda_star"]
    assert all({"lam", "stable", "slopes"} == set(e) for e in saved["evaluations"])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["bracket"] == [0.1, 0.6] and manifest["seeds"] == [0, 1]


def test_cli_boundary_unbracketed_is_exit_one(tmp_path, capsys):
    # both ends of this bracket sit below the line's saturation point
    scn = write_doc(tmp_path, line_doc())
    assert main(["boundary", scn, "--lo", "0.05", "--hi", "0.25",
                 "--seeds", "2", "--horizon", "400"]) == 1
    assert "not saturated" in capsys.readouterr().err


def test_cli_ufamily(tmp_path, capsys):
    path = write_doc(tmp_path, load_fixture("fig1").raw, "fig1.json")
    assert main(["ufamily", path, "--ramp", "ra4"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["ramp"] == "ra4"
    assert doc["levels"] == [
        [["ra4"]],
        [["ra2", "ra3"]],
        [["ra1", "ra1"], ["ra1", "ra2"], ["ra1", "ra3"]],
        [[], ["ra1"], ["ra2"], ["ra3"]],
    ]
    assert main(["ufamily", path, "--ramp", "ra9"]) == 2
    assert "unknown ramp" in capsys.readouterr().err


def test_cli_ttt(tmp_path, capsys):
    scn = write_doc(tmp_path, line_doc())
    out = tmp_path / "tout"
    assert main(["ttt", scn, "--horizon", "400", "--trips", "20",
                 "--out", str(out)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc["mean_ttt_s"]) == {"drra", "safe_alinea"}
    # three slots of 31 m at 15 m/s is the floor for any door-to-door time
    assert all(v > 6.0 for v in doc["mean_ttt_s"].values())

    with open(out / "ttt.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["policy", "exit_time_s", "mean_ttt_s"]
    assert {r[0] for r in rows[1:]} == {"drra", "safe_alinea"}
    svg = ET.parse(out / "ttt.svg").getroot()
    assert svg.tag.endswith("svg")
    assert (out / "manifest.json").is_file()

    assert main(["ttt", scn, "--horizon", "200", "--trips", "100000"]) == 1
    assert "need 100000" in capsys.readouterr().err


def test_cli_plot(tmp_path, capsys):
    src = tmp_path / "data.csv"
    with open(src, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "a", "b"])
        for i in range(10):
            w.writerow([i, i * i, 10 - i])
    dest = tmp_path / "plot.svg"
    assert main(["plot", "--csv", str(src), "--x", "t", "--y", "a", "b",
                 "--out", str(dest), "--title", "demo"]) == 0
    root = ET.parse(dest).getroot()
    assert root.tag.endswith("svg")
    capsys.readouterr()
    assert main(["plot", "--csv", str(src), "--x", "t", "--y", "zzz",
                 "--out", str(dest)]) == 2
    assert "zzz" in capsys.readouterr().err
    empty = tmp_path / "empty.csv"
    empty.write_text("t,a\n")
    assert main(["plot", "--csv", str(empty), "--x", "t", "--y", "a",
                 "--out", str(dest)]) == 2
    assert "empty csv" in capsys.readouterr().err
