"""Tests for result tables: CSV emission, stored runs and summaries."""

import pytest

from app.config_service import build_spec
from app.models import MetricRow
from app.report_service import CSV_COLUMNS, ReportError, ReportService, format_value


def make_rows() -> list[MetricRow]:
    rows = []
    for value in (0.3, 0.7):
        for metric, mean in (("harvested_joint", 12.5 / value), ("sum_rate_joint_bits", 9.25 * value)):
            rows.append(
                MetricRow(
                    scenario="custom",
                    sweep_name="mu",
                    sweep_value=value,
                    trials=20,
                    metric=metric,
                    mean=mean,
                    stderr=0.125,
                )
            )
    return rows


@pytest.fixture
def spec():
    return build_spec({"sweep_values": [0.3, 0.7], "trials": 20})


def test_empty_table_writes_header_only(tmp_path):
    path = ReportService.emit_csv([], tmp_path / "empty.csv")
    assert path.read_text(encoding="utf-8") == ",".join(CSV_COLUMNS) + "\n"


def test_csv_columns_and_formatting(tmp_path):
    path = ReportService.emit_csv(make_rows()[:1], tmp_path / "out" / "one.csv")
    header, line = path.read_text(encoding="utf-8").splitlines()
    assert header == "scenario,sweep_name,sweep_value,trials,metric,mean,stderr"
    assert line == f"custom,mu,0.3,20,harvested_joint,{format_value(12.5 / 0.3)},0.125"


def test_format_keeps_nine_significant_digits():
    assert format_value(1 / 3) == "0.333333333"
    assert format_value(2.0) == "2"
    assert format_value(1.5e-12) == "1.5e-12"


def test_csv_round_trip(tmp_path):
    rows = make_rows()
    read = ReportService.read_csv(ReportService.emit_csv(rows, tmp_path / "rows.csv"))
    assert [row.metric for row in read] == [row.metric for row in rows]
    for original, parsed in zip(rows, read):
        assert parsed.sweep_value == original.sweep_value
        assert parsed.trials == original.trials
        assert parsed.mean == pytest.approx(original.mean, rel=1e-8)


def test_writing_to_a_directory_fails(tmp_path):
    with pytest.raises(ReportError):
        ReportService.emit_csv(make_rows(), tmp_path)


def test_unexpected_header_is_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("metric,mean\nx,1\n", encoding="utf-8")
    with pytest.raises(ReportError, match="unexpected columns"):
        ReportService.read_csv(path)


def test_missing_results_file_is_a_report_error(tmp_path):
    with pytest.raises(ReportError):
        ReportService.read_csv(tmp_path / "absent.csv")


def test_save_and_fetch_run(new_db, spec):
    rows = make_rows()
    run = ReportService.save_run(spec, rows)
    assert run.id is not None
    assert run.trials == 20
    assert run.seed == spec.system.seed

    stored = ReportService.get_run_rows(run.id)
    assert [row.model_dump() for row in stored] == [row.model_dump() for row in rows]
    assert [r.id for r in ReportService.list_runs()] == [run.id]


def test_runs_are_listed_in_creation_order(new_db, spec):
    first = ReportService.save_run(spec, make_rows())
    second = ReportService.save_run(spec, [])
    assert [r.id for r in ReportService.list_runs()] == [first.id, second.id]
    assert second.id is not None
    assert ReportService.get_run_rows(second.id) == []


def test_unknown_run_is_not_found(new_db):
    assert ReportService.get_run(999) is None
    with pytest.raises(ValueError, match="not found"):
        ReportService.get_run_rows(999)


def test_export_of_stored_run_is_byte_identical(new_db, spec, tmp_path):
    """A stored run exports to exactly the file the run emitted."""
    rows = make_rows()
    original = ReportService.emit_csv(rows, tmp_path / "original.csv")
    run = ReportService.save_run(spec, rows)
    assert run.id is not None
    exported = ReportService.emit_csv(ReportService.get_run_rows(run.id), tmp_path / "exported.csv")
    assert exported.read_bytes() == original.read_bytes()


def test_summary_groups_by_sweep_value():
    text = ReportService.summarize(make_rows())
    lines = text.splitlines()
    assert lines[0] == "custom: sweep over mu"
    assert lines[1] == "  mu = 0.3 (20 trials)"
    assert "harvested_joint" in lines[2]
    assert "+- 0.125" in lines[2]
    assert lines[4] == "  mu = 0.7 (20 trials)"


def test_summary_filters_metrics():
    text = ReportService.summarize(make_rows(), metrics=["sum_rate_joint_bits"])
    assert "harvested_joint" not in text
    assert text.count("sum_rate_joint_bits") == 2


def test_summary_of_nothing():
    assert ReportService.summarize([]) == "no results\n"
    assert ReportService.summarize(make_rows(), metrics=["absent"]) == "no results\n"
