import csv
import io
import json

import numpy as np
import pandas as pd
import pytest

from core.bounds import tabulate_bounds
from core.results import (
    Report,
    bound_report,
    build_csv_text,
    build_excel_bytes,
    build_json_text,
    export_report,
    merge_reports,
)


def _baseline_report() -> Report:
    return Report(
        name="audit",
        columns=("check", "value", "pass"),
        rows=[
            {"check": "max_increase", "value": np.float64(0.1), "pass": np.bool_(True)},
            {"check": "tv", "value": 1.0 / 3.0, "pass": False, "extra": "ignored"},
        ],
        metadata={"seed": np.int64(7), "grid": np.array([0.0, 0.5])},
        failures=("tv exceeds 0.01",),
    )


def test_csv_text_is_header_then_rows_with_full_precision() -> None:
    text = build_csv_text(_baseline_report())
    assert "\r" not in text
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["check", "value", "pass"]
    assert rows[1] == ["max_increase", "0.10000000000000001", "true"]
    assert rows[2][2] == "false"
    assert float(rows[2][1]) == 1.0 / 3.0


def test_csv_text_of_empty_report_is_header_only() -> None:
    report = Report(name="bounds", columns=("t", "value"), rows=[])
    assert build_csv_text(report) == "t,value\n"


def test_json_text_unwraps_numpy_values() -> None:
    payload = json.loads(build_json_text(_baseline_report()))
    assert payload["name"] == "audit"
    assert payload["passed"] is False
    assert payload["failures"] == ["tv exceeds 0.01"]
    assert payload["metadata"] == {"grid": [0.0, 0.5], "seed": 7}
    assert payload["rows"][0]["pass"] is True


def test_excel_bytes_hold_one_sheet(tmp_path) -> None:
    data = build_excel_bytes(_baseline_report())
    assert data[:2] == b"PK"
    path = tmp_path / "audit.xlsx"
    path.write_bytes(data)
    frame = pd.read_excel(path, sheet_name="audit")
    assert list(frame.columns) == ["check", "value", "pass"]
    assert len(frame) == 2


def test_export_report_writes_files(tmp_path) -> None:
    report = _baseline_report()
    csv_path = tmp_path / "nested" / "audit.csv"
    export_report(report, csv_path, "csv")
    assert csv_path.read_text(encoding="utf-8") == build_csv_text(report)

    json_path = tmp_path / "audit.json"
    export_report(report, json_path, "json")
    assert json.loads(json_path.read_text(encoding="utf-8"))["columns"] == ["check", "value", "pass"]


def test_export_report_to_stdout(capsys) -> None:
    export_report(_baseline_report(), "-", "csv")
    assert capsys.readouterr().out.startswith("check,value,pass\n")


def test_export_report_rejects_bad_format_and_xlsx_stdout() -> None:
    with pytest.raises(ValueError) as exc:
        export_report(_baseline_report(), "-", "parquet")
    assert "format must be one of" in str(exc.value)
    with pytest.raises(ValueError) as exc:
        export_report(_baseline_report(), "-", "xlsx")
    assert "needs a file path" in str(exc.value)


def test_bound_report_columns_and_rows() -> None:
    table = tabulate_bounds(2.0, 1.0, [0.0, 1.0], families=["gauss", "basic"], metadata={"offset": 0.0})
    report = bound_report(table, "er_graph", "ge")
    assert report.columns == ("model", "statistic", "t", "bound", "side", "value", "mu", "c")
    assert len(report.rows) == 4
    assert report.rows[0]["model"] == "er_graph"
    assert report.rows[0]["value"] == 1.0
    assert report.metadata == {"offset": 0.0}


def test_merge_reports() -> None:
    first = _baseline_report()
    merged = merge_reports("all", [first, first])
    assert len(merged.rows) == 4
    assert merged.failures == first.failures * 2
    assert merge_reports("none", []).rows == []

    other = Report(name="other", columns=("t",), rows=[])
    with pytest.raises(ValueError) as exc:
        merge_reports("all", [first, other])
    assert "different columns" in str(exc.value)
