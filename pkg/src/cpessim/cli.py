"""Command-line front end.

Exit codes: 0 success, 1 domain-level negative result (threat-model
violations), 2 input error, 3 runtime/simulation error.  Machine-readable
output goes to stdout as JSON under --json; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import engine, presets, risk as risk_mod, threat_model as tm
from .metrics import TimeSeries
from .physical import IntegrationDivergedError, SingularBoundaryError
from .scenario import Scenario, ScenarioError, load_scenario, scenario_from_dict

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INPUT = 2
EXIT_RUNTIME = 3


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except tm.ThreatModelParseError as exc:
        print(f"threat model error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FileNotFoundError, NotADirectoryError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except json.JSONDecodeError as exc:
        print(f"input error: invalid JSON at line {exc.lineno} column {exc.colno}: "
              f"{exc.msg}", file=sys.stderr)
        return EXIT_INPUT
    except (KeyError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (IntegrationDivergedError, SingularBoundaryError, RuntimeError) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpessim",
        description="Co-simulation toolkit for cyber-physical energy system "
                    "security studies")
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="run a scenario file (or a directory with --batch)")
    p_run.add_argument("scenario", help="scenario JSON file, or a directory of them "
                                        "with --batch")
    p_run.add_argument("--out", default=None, help="output directory "
                       "(default ./out or $CPES_OUT)")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--batch", action="store_true",
                       help="treat SCENARIO as a directory and run every *.json in it")
    p_run.add_argument("--jobs", type=int, default=2, help="concurrent runs for --batch")
    p_run.add_argument("--json", action="store_true", help="print the report as JSON")
    p_run.add_argument("--emit-plot-data", action="store_true",
                       help="also write two-column .dat files per trace")
    p_run.set_defaults(func=_cmd_run)

    p_preset = sub.add_parser("preset", help="list built-in presets or emit one as JSON")
    p_preset.add_argument("action", choices=["list", "emit"])
    p_preset.add_argument("name", nargs="?", help="preset name for emit")
    p_preset.add_argument("--variant", default=None)
    p_preset.set_defaults(func=_cmd_preset)

    p_risk = sub.add_parser("risk", help="score a risk input file")
    p_risk.add_argument("input", help="JSON file: {probability, priorities?, impacts}")
    p_risk.add_argument("--json", action="store_true")
    p_risk.set_defaults(func=_cmd_risk)

    p_threat = sub.add_parser("threat", help="validate a threat model document")
    p_threat.add_argument("action", choices=["validate"])
    p_threat.add_argument("path", help="threat model JSON file")
    p_threat.add_argument("--json", action="store_true")
    p_threat.set_defaults(func=_cmd_threat)

    p_metrics = sub.add_parser("metrics",
                               help="recompute metric reports from an exported run")
    p_metrics.add_argument("run_dir", help="directory produced by `cpessim run`")
    p_metrics.add_argument("--json", action="store_true")
    p_metrics.set_defaults(func=_cmd_metrics)
    return parser


def _default_out() -> Path:
    return Path(os.environ.get("CPES_OUT", "out"))


def _cmd_run(args) -> int:
    out_base = Path(args.out) if args.out else _default_out()
    if args.batch:
        paths = sorted(Path(args.scenario).glob("*.json"))
        if not paths:
            print(f"input error: no scenario files in {args.scenario}", file=sys.stderr)
            return EXIT_INPUT
        scenarios = [load_scenario(p) for p in paths]
        results = engine.run_many(scenarios, jobs=args.jobs)
        for sc, result in zip(scenarios, results):
            _export_run(result, sc, out_base / sc.name, args)
        return EXIT_OK
    sc = load_scenario(args.scenario)
    result = engine.run(sc, seed=args.seed)
    _export_run(result, sc, out_base, args)
    return EXIT_OK


def _export_run(result, sc: Scenario, out_dir: Path, args) -> None:
    engine.export(result, out_dir, scenario_doc=sc.doc)
    if args.emit_plot_data:
        plot_dir = out_dir / "plot"
        plot_dir.mkdir(parents=True, exist_ok=True)
        for name, series in sorted(result.traces.items()):
            lines = [f"{float(t)!r} {float(v)!r}" for t, v in zip(series.t, series.v)]
            (plot_dir / f"{name}.dat").write_text("\n".join(lines) + "\n")
    report = engine.report_dict(result)
    if args.json:
        print(json.dumps(report))
    else:
        print((out_dir / "report.txt").read_text(), end="")
        print(f"exported to {out_dir}", file=sys.stderr)


def _cmd_preset(args) -> int:
    if args.action == "list":
        for name in presets.PRESET_NAMES:
            print(f"{name:<12} {presets.PRESET_INFO[name]}")
        return EXIT_OK
    if not args.name:
        print("input error: preset emit needs a name", file=sys.stderr)
        return EXIT_INPUT
    doc = presets.preset_doc(args.name, args.variant)
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def _cmd_risk(args) -> int:
    raw = json.loads(Path(args.input).read_text())
    prob = risk_mod.ThreatProbability(int(raw["probability"]))
    priorities = (risk_mod.priorities_from_names(raw["priorities"])
                  if "priorities" in raw else risk_mod.CPES_PRIORITIES)
    impacts = risk_mod.impacts_from_names(raw["impacts"])
    thresholds = tuple(raw.get("pool_thresholds", risk_mod.DEFAULT_POOL_THRESHOLDS))
    report = risk_mod.risk(prob, priorities, impacts, thresholds,
                           name=raw.get("name", ""))
    doc = risk_mod.report_to_dict(report)
    if args.json:
        print(json.dumps(doc))
    else:
        print(f"damage: {report.damage}")
        print(f"risk:   {report.risk}")
        print(f"pool:   {report.pool}")
        for obj, score in report.per_objective_scores.items():
            print(f"  {obj.value:<28} {score}")
    return EXIT_OK


def _cmd_threat(args) -> int:
    model = tm.deserialize(Path(args.path).read_text())
    violations = tm.validate(model)
    if args.json:
        print(json.dumps({"name": model.name, "ok": not violations,
                          "violations": violations}))
    else:
        if violations:
            for v in violations:
                print(f"violation: {v}")
        else:
            print(f"{model.name}: ok")
    return EXIT_NEGATIVE if violations else EXIT_OK


def _cmd_metrics(args) -> int:
    run_dir = Path(args.run_dir)
    doc = json.loads((run_dir / "scenario.json").read_text())
    sc = scenario_from_dict(doc)
    traces = {}
    for path in sorted((run_dir / "traces").glob("*.csv")):
        series = TimeSeries.from_csv(path.read_text())
        traces[series.name] = series
    events = json.loads((run_dir / "events.json").read_text())["events"]
    reports = engine.compute_metrics(sc, traces, events)
    doc = {"scenario": sc.name, "metrics": [r.to_dict() for r in reports]}
    if args.json:
        print(json.dumps(doc))
    else:
        for r in reports:
            print(f"[{r.kind}] trace={r.trace}")
            for key, value in r.values.items():
                print(f"  {key:<32} {value}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
