"""Command-line front end.

Subcommands:

  validate        check a scenario file and print any violations
  bounds          exact admissible-rate bounds for a scenario
  schedule-check  verify (or search for) a conflict-free release schedule
  run             simulate and write queue/vehicle traces plus a manifest
  boundary        bisect for the stability boundary in the arrival rate
  ufamily         upstream release-set family for one ramp
  ttt             compare average travel times across metering policies
  plot            render columns of a CSV file as an SVG line plot

Exit status: 0 on success, 1 when the input is well formed but the answer
is negative (validation violations, a schedule conflict, an unstable or
unbracketed sweep), 2 for malformed input or bad usage.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import platform
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import estimate_boundary, enumerate_U, inner_bound, outer_bound, ttt, ttt_series
from .errors import BracketError, ConfigurationError, ParameterError, RampSimError
from .plotting import Series, write_line_svg
from .scenario import load_scenario, run_scenario, scenario_hash, validate_scenario
from .schedule import find_offsets, verify_conflict_free

__all__ = ["main"]


def _frac_json(f: Fraction) -> dict:
    return {"num": f.numerator, "den": f.denominator}


def _manifest(args, scenario, extra: dict) -> dict:
    doc = {
        "command": " ".join(sys.argv[1:]) if sys.argv[1:] else args.cmd,
        "scenario": scenario.name,
        "scenario_sha256": scenario_hash(scenario),
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    doc.update(extra)
    return doc


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    return load_scenario(args.scenario)


def _cmd_validate(args) -> int:
    sc = _load(args)
    report = validate_scenario(sc)
    if report.ok:
        print(f"{sc.name}: ok")
        return 0
    for v in report.violations:
        print(f"{v.code}: {v.message}")
    return 1


def _cmd_bounds(args) -> int:
    sc = _load(args)
    schedule = sc.policy.schedule
    out = {"outer": _frac_json(outer_bound(sc.network, sc.demand))}
    out["outer_float"] = out["outer"]["num"] / out["outer"]["den"]
    if schedule is not None:
        inner = inner_bound(sc.network, sc.demand, schedule)
        out["inner"] = _frac_json(inner)
        out["inner_float"] = inner.numerator / inner.denominator
    print(json.dumps(out, indent=2))
    return 0


def _cmd_schedule_check(args) -> int:
    sc = _load(args)
    schedule = sc.policy.schedule
    if schedule is None:
        print("scenario has no release schedule", file=sys.stderr)
        return 2
    if args.search:
        periods = {r: s.period for r, s in schedule.entries.items()}
        counts = {r: len(s.offsets) for r, s in schedule.entries.items()}
        found = find_offsets(sc.network, periods, counts)
        if found is None:
            print(json.dumps({"found": False}))
            return 1
        print(json.dumps({"found": True, "schedule": found.as_dict()}, indent=2))
        return 0
    witness = verify_conflict_free(sc.network, schedule, strict=args.strict)
    if witness is None:
        print(json.dumps({"conflict_free": True}))
        return 0
    print(json.dumps({"conflict_free": False, "witness": witness.as_dict()}, indent=2))
    return 1


def _cmd_run(args) -> int:
    sc = _load(args)
    report = validate_scenario(sc)
    if not report.ok:
        for v in report.violations:
            print(f"{v.code}: {v.message}", file=sys.stderr)
        return 1
    if args.policy:
        sc = sc.with_policy_kind(args.policy)
    seed = args.seed if args.seed is not None else sc.experiment.seeds[0]
    horizon = args.horizon if args.horizon is not None else sc.experiment.horizon_steps
    backend = args.backend or sc.experiment.backend
    trace, metrics = run_scenario(sc, horizon=horizon, seed=seed, backend=backend)

    out = _outdir(args)
    tau = float(sc.constants.tau)
    with open(out / "queues.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        ramps = list(trace.ramps)
        per = getattr(trace, "queue_per_ramp", None)
        w.writerow(["step", "time_s", "queue_total"] + [f"queue_{r}" for r in ramps])
        for s, q in enumerate(trace.queue_total):
            row = [s, s * tau, int(q)]
            if per is not None:
                row += [int(per[s, j]) for j in range(len(ramps))]
            w.writerow(row)
    if trace.logs:
        with open(out / "vehicles.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            fields = [f.name for f in dataclasses.fields(trace.logs[0])]
            w.writerow(fields)
            for log in trace.logs:
                w.writerow([getattr(log, f) for f in fields])
    mdoc = dict(metrics.__dict__) if not isinstance(metrics, dict) else dict(metrics)
    with open(out / "metrics.json", "w") as fh:
        json.dump(mdoc, fh, indent=2, default=str)
    manifest = _manifest(args, sc, {
        "seed": seed, "horizon_steps": horizon, "backend": backend,
        "policy": sc.policy.kind,
    })
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    print(f"wrote {out}/queues.csv metrics.json manifest.json "
          f"(final queue {int(trace.queue_total[-1])})")
    return 0


def _cmd_boundary(args) -> int:
    sc = _load(args)
    if args.policy:
        sc = sc.with_policy_kind(args.policy)
    if args.non_reactive:
        sc = sc.with_non_reactive(True)
    seeds = range(args.seeds)
    horizon = args.horizon if args.horizon is not None else sc.experiment.horizon_steps

    def progress(lam, stable, slopes):
        print(f"  lambda={lam:.4f} {'stable' if stable else 'saturated'} "
              f"(median slope {sorted(slopes)[len(slopes) // 2]:.2e})", file=sys.stderr)

    est = estimate_boundary(
        sc, args.lo, args.hi, seeds=seeds, horizon=horizon,
        resolution=args.resolution, progress=progress if args.verbose else None,
    )
    doc = {
        "lambda_star": est.lambda_star, "lo": est.lo, "hi": est.hi,
        "evaluations": [
            {"lam": lam, "stable": stable, "slopes": slopes}
            for lam, stable, slopes in est.evaluations
        ],
    }
    if args.out:
        out = _outdir(args)
        with open(out / "boundary.json", "w") as fh:
            json.dump(doc, fh, indent=2)
        manifest = _manifest(args, sc, {
            "seeds": list(seeds), "horizon_steps": horizon,
            "bracket": [args.lo, args.hi], "resolution": args.resolution,
        })
        with open(out / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2)
    print(json.dumps({"lambda_star": est.lambda_star, "lo": est.lo, "hi": est.hi}))
    return 0


def _cmd_ufamily(args) -> int:
    sc = _load(args)
    if args.ramp not in sc.network.ramps:
        print(f"unknown ramp {args.ramp!r}; ramps: {sc.network.ramps}", file=sys.stderr)
        return 2
    levels = enumerate_U(sc.network, args.ramp, max_levels=args.max_levels)
    doc = [sorted(list(ms) for ms in level) for level in levels]
    print(json.dumps({"ramp": args.ramp, "levels": doc}, indent=2))
    return 0


def _cmd_ttt(args) -> int:
    sc = _load(args)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    seed = args.seed if args.seed is not None else sc.experiment.seeds[0]
    horizon = args.horizon if args.horizon is not None else sc.experiment.horizon_steps
    tau = float(sc.constants.tau)
    results = {}
    curves = []
    for kind in policies:
        variant = sc.with_policy_kind(kind)
        trace, _ = run_scenario(variant, horizon=horizon, seed=seed)
        tau_arg = None if hasattr(trace, "xf_series") else tau
        times, means = ttt_series(trace.logs, tau_s=tau_arg)
        if len(times) < args.trips:
            print(f"{kind}: only {len(times)} completed trips, need {args.trips}",
                  file=sys.stderr)
            return 1
        results[kind] = ttt(trace.logs, args.trips, tau_s=tau_arg)
        curves.append(Series(list(times), list(means), label=kind))
    if args.out:
        out = _outdir(args)
        with open(out / "ttt.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["policy", "exit_time_s", "mean_ttt_s"])
            for s in curves:
                for t, m in zip(s.x, s.y):
                    w.writerow([s.label, t, m])
        write_line_svg(out / "ttt.svg", curves, title=sc.name,
                       xlabel="exit time (s)", ylabel="mean travel time (s)")
        manifest = _manifest(args, sc, {
            "seed": seed, "horizon_steps": horizon, "policies": policies,
            "trips": args.trips,
        })
        with open(out / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2)
    print(json.dumps({"trips": args.trips, "mean_ttt_s": results}, indent=2))
    return 0


def _cmd_plot(args) -> int:
    with open(args.csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        print("empty csv", file=sys.stderr)
        return 2
    missing = [c for c in [args.x] + args.y if c not in rows[0]]
    if missing:
        print(f"columns not in {args.csv}: {missing}", file=sys.stderr)
        return 2
    series = []
    for col in args.y:
        xs = [float(r[args.x]) for r in rows]
        ys = [float(r[col]) for r in rows]
        series.append(Series(xs, ys, label=col))
    write_line_svg(args.out, series, title=args.title or "",
                   xlabel=args.x, ylabel=", ".join(args.y))
    print(f"wrote {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rampsim", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    q = sub.add_parser("validate", help="check a scenario file")
    q.add_argument("scenario")
    q.set_defaults(fn=_cmd_validate)

    q = sub.add_parser("bounds", help="exact admissible-rate bounds")
    q.add_argument("scenario")
    q.set_defaults(fn=_cmd_bounds)

    q = sub.add_parser("schedule-check", help="verify or search release schedules")
    q.add_argument("scenario")
    q.add_argument("--strict", action="store_true",
                   help="also treat the entry step itself as a crossing")
    q.add_argument("--search", action="store_true",
                   help="search offsets for the scenario's periods and counts")
    q.set_defaults(fn=_cmd_schedule_check)

    q = sub.add_parser("run", help="simulate one seed and write traces")
    q.add_argument("scenario")
    q.add_argument("--horizon", type=int, default=None)
    q.add_argument("--seed", type=int, default=None)
    q.add_argument("--backend", choices=["slot", "kinematic"], default=None)
    q.add_argument("--policy", choices=["drra", "safe_alinea"], default=None)
    q.add_argument("--out", default="out")
    q.set_defaults(fn=_cmd_run)

    q = sub.add_parser("boundary", help="bisect for the stability boundary")
    q.add_argument("scenario")
    q.add_argument("--lo", type=float, required=True)
    q.add_argument("--hi", type=float, required=True)
    q.add_argument("--seeds", type=int, default=8)
    q.add_argument("--horizon", type=int, default=None)
    q.add_argument("--resolution", type=float, default=0.01)
    q.add_argument("--policy", choices=["drra", "safe_alinea"], default=None)
    q.add_argument("--non-reactive", action="store_true")
    q.add_argument("--out", default=None)
    q.add_argument("--verbose", action="store_true")
    q.set_defaults(fn=_cmd_boundary)

    q = sub.add_parser("ufamily", help="upstream release-set family for a ramp")
    q.add_argument("scenario")
    q.add_argument("--ramp", required=True)
    q.add_argument("--max-levels", type=int, default=None)
    q.set_defaults(fn=_cmd_ufamily)

    q = sub.add_parser("ttt", help="compare travel times across policies")
    q.add_argument("scenario")
    q.add_argument("--policies", default="drra,safe_alinea")
    q.add_argument("--trips", type=int, default=200)
    q.add_argument("--horizon", type=int, default=None)
    q.add_argument("--seed", type=int, default=None)
    q.add_argument("--out", default=None)
    q.set_defaults(fn=_cmd_ttt)

    q = sub.add_parser("plot", help="render CSV columns as an SVG line plot")
    q.add_argument("--csv", required=True)
    q.add_argument("--x", required=True)
    q.add_argument("--y", nargs="+", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--title", default=None)
    q.set_defaults(fn=_cmd_plot)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigurationError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BracketError as exc:
        print(f"bracket: {exc}", file=sys.stderr)
        return 1
    except RampSimError as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
