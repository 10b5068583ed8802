from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional

from .schemas import ConvergenceRow, StudyReport

CSV_COLUMNS = ("level", "h_nominal", "h_measured", "dofs", "method", "error_l2", "eoc", "runtime_ms")
CSV_HEADER = ",".join(CSV_COLUMNS)


def format_row(row: ConvergenceRow) -> str:
    return ",".join(
        (
            str(row.level),
            repr(float(row.h_nominal)),
            repr(float(row.h_measured)),
            str(row.dofs),
            row.method,
            _optional(row.error_l2),
            _optional(row.eoc),
            repr(float(row.runtime_ms)),
        )
    )


def emit_csv(rows: Iterable[ConvergenceRow]) -> str:
    lines = [CSV_HEADER, *(format_row(row) for row in rows)]
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> list[ConvergenceRow]:
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"CSV header must be {CSV_HEADER!r}")
    rows: list[ConvergenceRow] = []
    for number, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(CSV_COLUMNS):
            raise ValueError(f"line {number}: expected {len(CSV_COLUMNS)} columns, got {len(cells)}")
        record = dict(zip(CSV_COLUMNS, cells))
        error = _parse_optional(record["error_l2"])
        rows.append(
            ConvergenceRow(
                level=int(record["level"]),
                h_nominal=float(record["h_nominal"]),
                h_measured=float(record["h_measured"]),
                dofs=int(record["dofs"]),
                method=record["method"],
                error_l2=error,
                eoc=_parse_optional(record["eoc"]),
                runtime_ms=float(record["runtime_ms"]),
                status="ok" if error is not None else "failed",
            )
        )
    return rows


def write_csv(rows: Iterable[ConvergenceRow], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(emit_csv(rows), encoding="utf-8")
    return path


def sidecar_path(csv_path: Path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_sidecar(report: StudyReport, csv_path: Path) -> Path:
    path = sidecar_path(csv_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(report.model_dump(mode="json"), ensure_ascii=False, indent=2),
        encoding="utf-8",
    )
    return path


def format_table(columns: dict[str, list[ConvergenceRow]]) -> str:
    """Side-by-side `mesh size h | ||e_h|| | eoc` blocks, one per study."""
    labels = list(columns)
    depth = max((len(rows) for rows in columns.values()), default=0)
    width = 32
    head = " || ".join(label.center(width) for label in labels)
    sub = " || ".join(f"{'mesh size h':>11} | {'||e_h||':>9} | {'eoc':>6}".ljust(width) for _ in labels)
    lines = [head, sub, "-" * len(sub)]
    for i in range(depth):
        cells = []
        for label in labels:
            rows = columns[label]
            cells.append(_table_cell(rows[i] if i < len(rows) else None).ljust(width))
        lines.append(" || ".join(cells))
    return "\n".join(lines)


def _table_cell(row: Optional[ConvergenceRow]) -> str:
    if row is None:
        return ""
    if row.status == "failed":
        return f"{row.h_nominal:>11.5f} | {'failed':>9} | {'':>6}"
    error = f"{row.error_l2:.5f}" if row.error_l2 is not None else ""
    rate = f"{row.eoc:.5f}" if row.eoc is not None else ""
    return f"{row.h_nominal:>11.5f} | {error:>9} | {rate:>6}"


def _optional(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _parse_optional(cell: str) -> Optional[float]:
    cell = cell.strip()
    return float(cell) if cell else None
