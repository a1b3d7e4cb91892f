"""Report data structures and their CSV, JSON and XLSX exporters."""

from dataclasses import dataclass, field
import csv
import io
import json
import math
from pathlib import Path
import sys
from typing import Any

import numpy as np
import pandas as pd

from .bounds import TailBoundReport

FORMATS = ("csv", "json", "xlsx")


@dataclass(frozen=True, slots=True)
class Report:
    """Tabular result of a command: ordered columns, one dict per row, plus metadata."""

    name: str
    columns: tuple[str, ...]
    rows: list[dict[str, Any]]
    metadata: dict[str, Any] = field(default_factory=dict)
    failures: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.failures


def merge_reports(name: str, reports: list[Report], metadata: dict[str, Any] | None = None) -> Report:
    """Concatenate reports sharing the first report's columns, keeping input order."""

    if not reports:
        return Report(name=name, columns=(), rows=[], metadata=dict(metadata or {}))
    columns = reports[0].columns
    for report in reports[1:]:
        if report.columns != columns:
            raise ValueError(f"cannot merge report {report.name} with different columns")
    return Report(
        name=name,
        columns=columns,
        rows=[row for report in reports for row in report.rows],
        metadata=dict(metadata or {}),
        failures=tuple(failure for report in reports for failure in report.failures),
    )


def bound_report(bounds: TailBoundReport, model: str, statistic: str) -> Report:
    rows = [{"model": model, "statistic": statistic, **row} for row in bounds.rows()]
    return Report(
        name="bounds",
        columns=("model", "statistic", "t", "bound", "side", "value", "mu", "c"),
        rows=rows,
        metadata=dict(bounds.metadata),
    )


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        number = float(value)
        if math.isnan(number):
            return "nan"
        return f"{number:.17g}"
    return "" if value is None else str(value)


def _plain(value: Any) -> Any:
    """JSON-safe copy with numpy scalars and arrays unwrapped."""

    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        return number if math.isfinite(number) else str(number)
    return value


def build_csv_text(report: Report) -> str:
    """One header row then the rows in order; '.' decimals, 17 significant digits, LF endings."""

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(report.columns)
    for row in report.rows:
        writer.writerow([_cell(row.get(column)) for column in report.columns])
    return buffer.getvalue()


def build_json_text(report: Report) -> str:
    payload = {
        "name": report.name,
        "columns": list(report.columns),
        "rows": report.rows,
        "metadata": report.metadata,
        "passed": report.passed,
        "failures": list(report.failures),
    }
    return json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n"


def build_excel_bytes(report: Report) -> bytes:
    """Build XLSX export bytes with one sheet per report."""

    df = pd.DataFrame([{column: row.get(column) for column in report.columns} for row in report.rows], columns=list(report.columns))
    output = io.BytesIO()
    last_error: Exception | None = None
    for engine in ("xlsxwriter", "openpyxl"):
        try:
            with pd.ExcelWriter(output, engine=engine) as writer:
                df.to_excel(writer, sheet_name=report.name[:31] or "report", index=False)
            return output.getvalue()
        except ModuleNotFoundError as exc:
            last_error = exc
            output = io.BytesIO()
    raise RuntimeError("No Excel writer engine available (xlsxwriter/openpyxl).") from last_error


def export_report(report: Report, path: str | Path, fmt: str = "csv") -> None:
    """Write a report to path, or to standard output when path is '-'."""

    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {', '.join(FORMATS)}")
    if fmt == "xlsx":
        if str(path) == "-":
            raise ValueError("xlsx output needs a file path")
        data = build_excel_bytes(report)
        output_path = Path(path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_bytes(data)
        return

    text = build_csv_text(report) if fmt == "csv" else build_json_text(report)
    if str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    output_path = Path(path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with output_path.open("w", newline="", encoding="utf-8") as handle:
        handle.write(text)
