"""``wipt`` command line: run, analyze and validate experiment specs, list and export stored runs."""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from app.analysis_service import AnalysisError
from app.config_service import ConfigError, load_spec, validate_sweep
from app.experiment_service import ExperimentService
from app.models import MetricRow
from app.numerics import NumericError
from app.oracle_service import OracleError
from app.report_service import CSV_COLUMNS, ReportError, ReportService
from app.startup import startup

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

SUMMARY_METRICS = [
    "set_size",
    "sum_rate_bits",
    "sinr_gap_db",
    "harvested_joint",
    "harvested_zf",
    "harvested_oracle",
    "analysis_sum_rate_bits",
    "analysis_joint_lower_total",
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wipt", description="Joint information and energy beamforming experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="simulate a spec and write its CSV")
    run.add_argument("--spec", type=Path, required=True)
    run.add_argument("--out", type=Path, default=None, help="output directory (default: the spec's output)")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--trials", type=int, default=None)
    run.add_argument("--parallel", type=int, default=None)
    run.add_argument("--no-store", action="store_true", help="do not record the run in the results database")

    analyze = commands.add_parser("analyze", help="closed-form predictions only")
    analyze.add_argument("--spec", type=Path, required=True)
    analyze.add_argument("--out", type=Path, default=None, help="CSV file (default: standard output)")

    validate = commands.add_parser("validate", help="check a spec file")
    validate.add_argument("--spec", type=Path, required=True)

    commands.add_parser("runs", help="list stored runs")

    export = commands.add_parser("export", help="write a stored run as CSV")
    export.add_argument("--run-id", type=int, required=True)
    export.add_argument("--out", type=Path, required=True)
    return parser


def _write_rows_to_stdout(rows: List[MetricRow]) -> None:
    sys.stdout.write(",".join(CSV_COLUMNS) + "\n")
    for row in rows:
        record = ReportService.to_record(row)
        sys.stdout.write(",".join(record[column] for column in CSV_COLUMNS) + "\n")


def _run(args: argparse.Namespace) -> int:
    spec = load_spec(args.spec, seed=args.seed, trials=args.trials, parallel=args.parallel)
    rows = ExperimentService.run_experiment(spec)
    out_dir = args.out if args.out is not None else Path(spec.output)
    path = ReportService.emit_csv(rows, out_dir / f"{spec.scenario.value}_{spec.sweep_name.value}.csv")
    if not args.no_store:
        run = ReportService.save_run(spec, rows)
        sys.stdout.write(f"stored as run {run.id}\n")
    sys.stdout.write(ReportService.summarize(rows, SUMMARY_METRICS))
    sys.stdout.write(f"wrote {path}\n")
    return EXIT_OK


def _analyze(args: argparse.Namespace) -> int:
    spec = load_spec(args.spec)
    rows = ExperimentService.analyze(spec)
    if args.out is None:
        _write_rows_to_stdout(rows)
    else:
        ReportService.emit_csv(rows, args.out)
    return EXIT_OK


def _validate(args: argparse.Namespace) -> int:
    spec = load_spec(args.spec)
    points = validate_sweep(spec)
    sys.stdout.write(
        f"ok: {spec.scenario.value}, {len(points)} points over {spec.sweep_name.value}, "
        f"{spec.trials} trials, effective SNR {spec.system.effective_snr_db:.1f} dB\n"
    )
    return EXIT_OK


def _runs(_: argparse.Namespace) -> int:
    for run in ReportService.list_runs():
        sys.stdout.write(
            f"{run.id}\t{run.created_at:%Y-%m-%d %H:%M}\t{run.scenario.value}\t{run.sweep_name.value}\t"
            f"seed={run.seed}\ttrials={run.trials}\n"
        )
    return EXIT_OK


def _export(args: argparse.Namespace) -> int:
    ReportService.emit_csv(ReportService.get_run_rows(args.run_id), args.out)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    startup(logging.DEBUG if args.verbose else logging.INFO)
    match args.command:
        case "run":
            handler = _run
        case "analyze":
            handler = _analyze
        case "validate":
            handler = _validate
        case "runs":
            handler = _runs
        case _:
            handler = _export
    try:
        return handler(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        sys.stderr.write(f"configuration error:\n{e}\n")
        return EXIT_CONFIG
    except ValueError as e:
        # NumericError subclasses ValueError; the rest is bad input such as an unknown run id.
        logger.error(f"{args.command} failed: {e}")
        sys.stderr.write(f"error: {e}\n")
        return EXIT_NUMERIC if isinstance(e, NumericError) else EXIT_CONFIG
    except (AnalysisError, OracleError, ReportError) as e:
        logger.error(f"{args.command} failed: {e}")
        sys.stderr.write(f"error: {e}\n")
        return EXIT_NUMERIC
