from __future__ import annotations

import json

import pytest

from scmfem.report import CSV_HEADER, emit_csv, format_row, format_table, parse_csv, write_csv, write_sidecar
from scmfem.schemas import ConvergenceRow, StudyConfig, StudyReport


def _rows():
    return [
        ConvergenceRow(level=0, h_nominal=0.25, h_measured=0.25, dofs=145, method="scm", error_l2=0.58725, runtime_ms=12.5),
        ConvergenceRow(
            level=1, h_nominal=0.125, h_measured=0.08838834764831845, dofs=801, method="scm", error_l2=0.42338, eoc=0.4720143, runtime_ms=40.0
        ),
    ]


def test__header_is_fixed():
    assert CSV_HEADER == "level,h_nominal,h_measured,dofs,method,error_l2,eoc,runtime_ms"
    assert emit_csv([]).splitlines() == [CSV_HEADER]


def test__first_row_has_a_blank_eoc():
    line = format_row(_rows()[0])
    assert line.split(",")[6] == ""
    assert line.startswith("0,0.25,0.25,145,scm,0.58725,,")


def test__emit_then_parse_keeps_every_field():
    rows = _rows()
    assert parse_csv(emit_csv(rows)) == rows


def test__failed_rows_have_blank_errors():
    failed = ConvergenceRow(level=2, h_nominal=0.0625, h_measured=0.0, dofs=0, method="standard", status="failed", message="boom")
    parsed = parse_csv(emit_csv([failed]))[0]
    assert parsed.status == "failed"
    assert parsed.error_l2 is None and parsed.eoc is None


@pytest.mark.parametrize(
    "text",
    ["", "level,h\n0,1\n", CSV_HEADER + "\n0,0.25,0.2,10,scm\n"],
)
def test__malformed_csv_is_rejected(text):
    with pytest.raises(ValueError):
        parse_csv(text)


def test__csv_and_sidecar_files(tmp_path):
    rows = _rows()
    csv_path = write_csv(rows, tmp_path / "nested" / "omega_270_scm.csv")
    assert parse_csv(csv_path.read_text(encoding="utf-8")) == rows
    report = StudyReport(config=StudyConfig(levels=2), rows=rows)
    sidecar = write_sidecar(report, csv_path)
    assert sidecar.suffix == ".json"
    data = json.loads(sidecar.read_text(encoding="utf-8"))
    assert StudyReport.model_validate(data) == report


def test__table_has_one_block_per_study():
    failed = ConvergenceRow(level=1, h_nominal=0.125, h_measured=0.0, dofs=0, method="scm", status="failed")
    table = format_table({"omega = 270 deg": _rows(), "omega = 355 deg": [_rows()[0], failed]})
    lines = table.splitlines()
    assert "omega = 270 deg" in lines[0] and "omega = 355 deg" in lines[0]
    assert lines[1].count("mesh size h") == 2
    assert "0.47201" in lines[4]
    assert "failed" in lines[4]
