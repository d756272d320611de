"""Command-line entry point. Exit codes: 0 ok, 1 validation error, 2 runtime error."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import agents, evaluation, experiments, sim, threat, wta
from .errors import ParseError, TewaError, UnknownExperiment, ValidationError

log = logging.getLogger("tewa")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None


def _read_sample(path) -> list[float]:
    text = Path(path).read_text() if path != "-" else sys.stdin.read()
    s = text.strip()
    if s.startswith("[") or s.startswith("{"):
        doc = json.loads(s)
        values = doc["sample"] if isinstance(doc, dict) else doc
    else:
        values = [tok for tok in s.replace(",", " ").split()]
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: non-numeric sample value ({exc})") from None


def cmd_simulate(args) -> int:
    path = args.scenario or sim.bundled_scenario_path()
    scenario = sim.load_scenario(path)
    jam = sim.JamInjection(enabled=not args.no_jam, scale=args.jam_scale)
    config = sim.SimConfig(
        seed=args.seed, ticks=args.ticks, replications=args.replications, jam=jam,
        solver=args.solver, generations=args.generations,
    )
    reports = sim.run_replications(scenario, config, workers=args.workers)
    sim.emit_report(reports, args.out)
    summary = sim.summarize(reports)
    print(json.dumps(summary, indent=1))
    return EXIT_OK


def cmd_assess(args) -> int:
    doc = _read_json(args.track_file)
    rows = doc["tracks"] if isinstance(doc, dict) else doc
    cl = args.cl if args.cl is not None else (doc.get("cl") if isinstance(doc, dict) else None)
    if cl is None:
        raise ValidationError("cl", "conflict level missing; pass --cl")
    tracks = []
    for i, row in enumerate(rows):
        try:
            tracks.append(threat.track_from_dict(row))
        except KeyError as exc:
            raise ValidationError(f"tracks[{i}].{exc.args[0]}", "missing required field") from None
        except ValueError as exc:
            raise ValidationError(f"tracks[{i}]", str(exc)) from None
    hostile = threat.release_tracks(tracks)
    if len(hostile) < len(tracks):
        log.info("filtered %d friendly tracks", len(tracks) - len(hostile))
    sys.stdout.write(threat.threats_to_csv(threat.prioritize(hostile, cl)))
    return EXIT_OK


def cmd_allocate(args) -> int:
    inst = wta.load_instance(args.instance)
    sol = wta.solve(inst, args.solver, budget=args.budget, seed=args.seed, generations=args.generations)
    print(json.dumps(sol.to_dict(), indent=1))
    return EXIT_OK


def cmd_fit(args) -> int:
    sample = _read_sample(args.sample)
    report = evaluation.rank_fits(sample)
    print(evaluation.dumps_fit_report(report, args.alpha))
    return EXIT_OK


def cmd_check_trace(args) -> int:
    try:
        text = Path(args.trace).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {args.trace}: {exc}") from None
    report = evaluation.check_trace_conflicts(agents.trace_from_csv(text))
    print(report.to_text())
    return EXIT_OK if report.clean else EXIT_VALIDATION


def cmd_experiment(args) -> int:
    for f in experiments.experiment(args.name, args.seed, args.out):
        print(f)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tewa", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the closed-loop scenario")
    s.add_argument("--scenario", help="scenario JSON (default: bundled paper_iv)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--ticks", type=int, default=120)
    s.add_argument("--replications", type=int, default=1)
    s.add_argument("--out", required=True)
    s.add_argument("--solver", choices=("exact", "greedy", "ga"))
    s.add_argument("--generations", type=int)
    s.add_argument("--jam-scale", type=float, default=1.0)
    s.add_argument("--no-jam", action="store_true", help="disable jam injection")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("assess", help="prioritize tracks from a JSON file")
    s.add_argument("--track-file", required=True)
    s.add_argument("--cl", type=float)
    s.set_defaults(func=cmd_assess)

    s = sub.add_parser("allocate", help="solve a WTA instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--solver", choices=("exact", "greedy", "ga"), default="ga")
    s.add_argument("--budget", type=float, help="GA wall-clock budget in seconds")
    s.add_argument("--generations", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_allocate)

    s = sub.add_parser("fit", help="rank distribution fits of a sample")
    s.add_argument("--sample", required=True, help="JSON list or whitespace-separated numbers ('-' for stdin)")
    s.add_argument("--alpha", type=float, default=0.05)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("check-trace", help="check a trace CSV for goal conflicts")
    s.add_argument("--trace", required=True)
    s.set_defaults(func=cmd_check_trace)

    s = sub.add_parser("experiment", help="run a canned experiment")
    s.add_argument("--name", required=True, help=", ".join(experiments.EXPERIMENTS))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValidationError, ParseError, UnknownExperiment) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TewaError, ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
