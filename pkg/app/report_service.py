"""Service layer for result tables: CSV files, stored runs and text summaries."""

import csv
import logging
from pathlib import Path
from typing import List, Optional

from sqlmodel import select

from app.database import get_session
from app.models import ExperimentRun, ExperimentSpec, MetricRow, ResultRow

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["scenario", "sweep_name", "sweep_value", "trials", "metric", "mean", "stderr"]


class ReportError(OSError):
    """A result file cannot be written or parsed."""


def format_value(value: float) -> str:
    return f"{value:.9g}"


class ReportService:
    """Service for emitting, storing and summarizing result tables."""

    @staticmethod
    def to_record(row: MetricRow) -> dict[str, str]:
        return {
            "scenario": row.scenario,
            "sweep_name": row.sweep_name,
            "sweep_value": format_value(row.sweep_value),
            "trials": str(row.trials),
            "metric": row.metric,
            "mean": format_value(row.mean),
            "stderr": format_value(row.stderr),
        }

    @staticmethod
    def emit_csv(rows: List[MetricRow], path: Path) -> Path:
        """Write the header and one line per row in CSV_COLUMNS order."""
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", newline="", encoding="utf-8") as handle:
                writer = csv.DictWriter(handle, fieldnames=CSV_COLUMNS, lineterminator="\n")
                writer.writeheader()
                writer.writerows(ReportService.to_record(row) for row in rows)
        except OSError as e:
            logger.error(f"Cannot write results to {path}: {e}")
            raise ReportError(f"cannot write results to {path}: {e}") from e
        logger.info(f"Wrote {len(rows)} rows to {path}")
        return path

    @staticmethod
    def read_csv(path: Path) -> List[MetricRow]:
        path = Path(path)
        try:
            with path.open(newline="", encoding="utf-8") as handle:
                reader = csv.DictReader(handle)
                if reader.fieldnames != CSV_COLUMNS:
                    raise ReportError(f"{path}: unexpected columns {reader.fieldnames}")
                return [MetricRow.model_validate(record) for record in reader]
        except OSError as e:
            logger.error(f"Cannot read results from {path}: {e}")
            if isinstance(e, ReportError):
                raise
            raise ReportError(f"cannot read results from {path}: {e}") from e

    @staticmethod
    def save_run(spec: ExperimentSpec, rows: List[MetricRow]) -> ExperimentRun:
        with get_session() as session:
            run = ExperimentRun(
                scenario=spec.scenario,
                sweep_name=spec.sweep_name,
                seed=spec.system.seed,
                trials=spec.trials,
                spec_json=spec.model_dump_json(),
            )
            session.add(run)
            session.commit()
            session.refresh(run)
            if run.id is None:
                raise ValueError("Failed to store experiment run")
            session.add_all(ResultRow(run_id=run.id, **row.model_dump()) for row in rows)
            session.commit()
            session.refresh(run)
            logger.info(f"Stored run {run.id} with {len(rows)} rows")
            return run

    @staticmethod
    def list_runs() -> List[ExperimentRun]:
        with get_session() as session:
            return list(session.exec(select(ExperimentRun).order_by(ExperimentRun.id)).all())

    @staticmethod
    def get_run(run_id: int) -> Optional[ExperimentRun]:
        with get_session() as session:
            return session.get(ExperimentRun, run_id)

    @staticmethod
    def get_run_rows(run_id: int) -> List[MetricRow]:
        with get_session() as session:
            if session.get(ExperimentRun, run_id) is None:
                raise ValueError(f"Run {run_id} not found")
            stored = session.exec(select(ResultRow).where(ResultRow.run_id == run_id).order_by(ResultRow.id)).all()
            return [MetricRow.model_validate(row.model_dump(exclude={"id", "run_id"})) for row in stored]

    @staticmethod
    def summarize(rows: List[MetricRow], metrics: Optional[List[str]] = None) -> str:
        """Plain-text table of ``mean +- stderr`` per sweep value and metric."""
        selected = [row for row in rows if metrics is None or row.metric in metrics]
        if not selected:
            return "no results\n"
        width = max(len(row.metric) for row in selected)
        lines = [f"{selected[0].scenario}: sweep over {selected[0].sweep_name}"]
        current: Optional[float] = None
        for row in selected:
            if row.sweep_value != current:
                current = row.sweep_value
                lines.append(f"  {row.sweep_name} = {format_value(row.sweep_value)} ({row.trials} trials)")
            lines.append(f"    {row.metric:<{width}}  {row.mean:>12.6g} +- {row.stderr:.3g}")
        return "\n".join(lines) + "\n"
