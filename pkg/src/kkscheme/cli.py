"""Command-line front end: simulate | verify | converge.

Exit codes: 0 success, 1 runtime or assertion failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .analysis import dump_json
from .config import ConfigError, RunConfig, default_config_yaml, load_config
from .diagnostics import SERIES_COLUMNS
from .experiment import Outcome, build_problem, converge, run, verify
from .grid_state import save_snapshot, write_state_csv
from .time_integrator import AssumptionError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("kkscheme")


def _versions() -> dict:
    import numpy
    import scipy
    import yaml

    return {
        "kkscheme": __version__,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "pyyaml": yaml.__version__,
    }


def write_manifest(outdir: Path, command: str, config: RunConfig, outputs: list) -> None:
    manifest = {
        "manifest_version": 1,
        "command": command,
        "config": config.to_dict(),
        "versions": _versions(),
        "outputs": sorted(outputs),
    }
    dump_json(manifest, outdir / "manifest.json")


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def write_run_outputs(outdir: Path, outcome: Outcome) -> list:
    """Snapshots, per-step series and the diagnostics report for one run."""
    cfg = outcome.problem.config
    grid = outcome.problem.grid
    written = []
    snapdir = outdir / "snapshots"
    snapdir.mkdir(parents=True, exist_ok=True)
    for i, s in enumerate(outcome.result.snapshots):
        if cfg.output.snapshot_csv:
            p = snapdir / f"snap_{i:05d}.csv"
            write_state_csv(p, s, grid)
            written.append(str(p.relative_to(outdir)))
        if cfg.output.snapshot_npz:
            p = snapdir / f"snap_{i:05d}.npz"
            save_snapshot(p, s, grid)
            written.append(str(p.relative_to(outdir)))
    times = [{"index": i, "t": s.t} for i, s in enumerate(outcome.result.snapshots)]
    dump_json(times, snapdir / "index.json")
    written.append("snapshots/index.json")

    if outcome.monitor is not None:
        with open(outdir / "series.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SERIES_COLUMNS)
            for row in outcome.monitor.rows:
                w.writerow([_fmt(row[c]) for c in SERIES_COLUMNS])
        written.append("series.csv")
    return written


def _run_block(outcome: Outcome) -> dict:
    r = outcome.result
    return {
        "steps": r.steps,
        "t_final": r.final.t,
        "complete": r.complete,
        "aborted": r.aborted,
        "message": r.message,
        "dt_min": float(r.dt_history.min()) if r.steps else None,
        "dt_max": float(r.dt_history.max()) if r.steps else None,
    }


def _print_verdicts(verdicts, stream=sys.stdout) -> None:
    print(f"{'lemma':<26} {'result':<6} {'worst margin':>14} {'at t':>10}", file=stream)
    for v in verdicts:
        t = "" if v.at_time is None or not math.isfinite(v.at_time) else f"{v.at_time:10.4g}"
        print(f"{v.name:<26} {'PASS' if v.passed else 'FAIL':<6} {v.worst_margin:>14.3e} {t:>10}",
              file=stream)


def cmd_simulate(config: RunConfig, quiet: bool = False) -> int:
    problem = build_problem(config)
    outdir = Path(config.output.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    outcome = run(problem, diagnostics=config.diagnostics.enabled)
    written = write_run_outputs(outdir, outcome)
    report = {"run": _run_block(outcome)}
    if outcome.monitor is not None:
        report.update(outcome.monitor.report())
    dump_json(report, outdir / "diagnostics.json")
    written.append("diagnostics.json")
    write_manifest(outdir, "simulate", config, written)
    if not quiet:
        r = outcome.result
        print(f"simulate: {r.steps} steps to t={r.final.t:.6g}, outputs in {outdir}")
    if outcome.result.aborted or not outcome.result.complete:
        print(f"simulate: run did not complete: {outcome.result.message}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_verify(config: RunConfig, quiet: bool = False) -> int:
    outcome = verify(config)
    outdir = Path(config.output.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    written = write_run_outputs(outdir, outcome.main)
    report = {
        "run": _run_block(outcome.main),
        **outcome.main.monitor.report(),
        "verdicts": [asdict(v) for v in outcome.verdicts],
        "budget_sweep": [asdict(e) for e in outcome.budget_sweep],
        "passed": outcome.passed,
    }
    dump_json(report, outdir / "diagnostics.json")
    written.append("diagnostics.json")
    write_manifest(outdir, "verify", config, written)
    if not quiet:
        _print_verdicts(outcome.verdicts)
    for v in outcome.verdicts:
        if not v.passed:
            print(f"verify: {v.name} FAILED: worst violation {v.worst_margin:.3e} at t={v.at_time:.6g}"
                  f" ({v.detail})", file=sys.stderr)
    return EXIT_OK if outcome.passed else EXIT_FAIL


def cmd_converge(config: RunConfig, quiet: bool = False) -> int:
    outcome = converge(config)
    outdir = Path(config.output.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    outcome.table.write_csv(outdir / "convergence.csv")
    dump_json({**outcome.table.to_dict(), "passed": outcome.passed, "reasons": outcome.reasons,
               "thresholds": {"min_rate": config.convergence.min_rate,
                              "min_residual_factor": config.convergence.min_residual_factor,
                              "note": "harness calibration values"}},
              outdir / "convergence.json")
    written = ["convergence.csv", "convergence.json"]
    for pid, study in outcome.studies.items():
        study.write_csv(outdir / f"weak_residual_{pid}.csv")
        dump_json(study.to_dict(), outdir / f"weak_residual_{pid}.json")
        written += [f"weak_residual_{pid}.csv", f"weak_residual_{pid}.json"]
    write_manifest(outdir, "converge", config, written)
    if not quiet:
        print(f"{'n_cells':>8} {'err_r':>12} {'rate_r':>7} {'err_u':>12} {'rate_u':>7} "
              f"{'err_v':>12} {'rate_v':>7}")
        for row in outcome.table.rows():
            print(f"{row['n_cells']:>8} {row['l1_error_r']:>12.4e} {row['rate_r']:>7.3f} "
                  f"{row['l1_error_u']:>12.4e} {row['rate_u']:>7.3f} "
                  f"{row['l1_error_v']:>12.4e} {row['rate_v']:>7.3f}")
        for pid, study in outcome.studies.items():
            fu = ", ".join(f"{f:.2f}" for f in study.factors_u)
            fv = ", ".join(f"{f:.2f}" for f in study.factors_v)
            print(f"weak residual {pid}: shrink factors u [{fu}] v [{fv}]")
    for reason in outcome.reasons:
        print(f"converge: {reason}", file=sys.stderr)
    return EXIT_OK if outcome.passed else EXIT_FAIL


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "converge": cmd_converge}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kkscheme",
        description="Upwind solver and estimate checks for the Keyfitz-Kranzer system.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="YAML config or an emitted manifest.json")
        p.add_argument("--output", metavar="DIR", help="output directory (overrides output.directory)")
        p.add_argument("--override", metavar="KEY=VALUE", action="append", default=[],
                       help="dotted config override, e.g. integrator.cfl=0.4 (repeatable)")
        p.add_argument("--quiet", action="store_true")
        p.add_argument("-v", "--verbose", action="count", default=0)
    sub.add_parser("defaults", help="print the default configuration")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "defaults":
        sys.stdout.write(default_config_yaml())
        return EXIT_OK
    level = logging.WARNING - 10 * args.verbose
    logging.basicConfig(level=max(level, logging.DEBUG), format="%(levelname)s %(name)s: %(message)s")
    if args.quiet:
        logging.getLogger().setLevel(logging.ERROR)
    try:
        overrides = list(args.override)
        if args.output:
            overrides.append(("output.directory", args.output))
        config = load_config(args.config, overrides)
        return COMMANDS[args.command](config, quiet=args.quiet)
    except (ConfigError, AssumptionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
