"""Command-line front end.

``droopsim run`` simulates one scenario and writes a summary, optional
CSV tables and optional SVG figures into an output directory.  Exit
codes: 0 on success, 2 for scenario problems, 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .engine import run_scenario
from .errors import (DcCollapseError, NonFiniteError, ScenarioParseError,
                     ScenarioValidationError, SimulationError)
from .scenario import builtin_scenarios, load_scenario

SCENARIO_NOTES = {
    "balanced": "matched lines, ideal sensors; the no-error reference",
    "mismatch_baseline": "mismatched lines plus a -5 V sensor offset, no correction",
    "mismatch_compensated": "same errors with adaptation and offset compensation on",
    "avi_engage": "mismatched lines only; virtual-impedance adaptation enabled at t=2 s",
    "offset_comp_engage": "sensor offset only; ripple-based compensation enabled at t=3 s",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="droopsim",
        description="Simulate parallel droop-controlled single-phase inverters.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate a scenario and write artifacts")
    run_p.add_argument("--scenario", required=True,
                       help="built-in scenario name or path to a scenario file")
    run_p.add_argument("--out", required=True, type=Path,
                       help="output directory (created if missing)")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the scenario's communication seed")
    run_p.add_argument("--csv", action="store_true",
                       help="write timeseries.csv, metrics.csv and messages.csv")
    run_p.add_argument("--plots", action="store_true",
                       help="render SVG figures next to the CSV output")
    run_p.add_argument("--decimate", type=int, default=None,
                       help="keep every K-th sample in timeseries.csv")

    sub.add_parser("list-scenarios", help="show the built-in scenario catalogue")

    val_p = sub.add_parser("validate", help="check a scenario file without running it")
    val_p.add_argument("path", type=Path)
    return parser


def _resolve_scenario(ref: str):
    catalogue = builtin_scenarios()
    if ref in catalogue:
        return catalogue[ref]
    path = Path(ref)
    if path.exists():
        return load_scenario(path)
    names = ", ".join(sorted(catalogue))
    raise ScenarioValidationError(
        "scenario", f"{ref!r} is neither a built-in ({names}) nor an existing file")


def _cmd_run(args) -> int:
    try:
        sc = _resolve_scenario(args.scenario)
    except (ScenarioParseError, ScenarioValidationError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    try:
        art = run_scenario(sc, seed=args.seed, decimate=args.decimate)
    except ScenarioValidationError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except (NonFiniteError, DcCollapseError) as exc:
        where = "" if exc.t is None else f" at t = {exc.t:.6g} s"
        print(f"numerical failure{where}: {exc}", file=sys.stderr)
        return 3

    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "summary.txt"]
    art.write_summary(written[0])
    if args.csv:
        art.write_timeseries(out / "timeseries.csv")
        art.write_metrics(out / "metrics.csv")
        art.write_messages(out / "messages.csv")
        written += [out / "timeseries.csv", out / "metrics.csv",
                    out / "messages.csv"]
    if args.plots:
        from .plots import emit_plots
        written += emit_plots(art, out)
    print(art.summary_text(), end="")
    print("wrote:")
    for path in written:
        print(f"  {path}")
    return 0


def _cmd_list() -> int:
    for name, sc in builtin_scenarios().items():
        note = SCENARIO_NOTES.get(name, "")
        print(f"{name:24s} {sc.duration:5.1f} s  {sc.n_units} units  {note}")
    return 0


def _cmd_validate(args) -> int:
    try:
        sc = load_scenario(args.path)
    except FileNotFoundError:
        print(f"scenario error: {args.path} does not exist", file=sys.stderr)
        return 2
    except (ScenarioParseError, ScenarioValidationError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    print(f"ok: {sc.name} ({sc.n_units} units, {sc.duration:g} s, "
          f"{len(sc.events)} events)")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "list-scenarios":
        return _cmd_list()
    if args.command == "validate":
        return _cmd_validate(args)
    raise SimulationError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
