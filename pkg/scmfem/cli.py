from __future__ import annotations

import asyncio
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

import click

from .config import AppConfig, build_study_config, load_app_config
from .logging_utils import setup_logging
from .report import CSV_HEADER, format_row, format_table, write_csv, write_sidecar
from .schemas import ConvergenceRow, StepEvent, StudyConfig, StudyReport
from .study import run_convergence

TABLE_ANGLES = (270.0, 355.0)


@click.group()
def main() -> None:
    """Corrected P1 solutions for Dirichlet problems with L2 data on domains
    with a reentrant corner."""
    setup_logging()


@main.command("run")
@click.option("--omega-deg", type=float, default=None, help="Opening angle of the corner in degrees.")
@click.option("--levels", type=int, default=None, help="Number of refinement levels.")
@click.option("--method", type=click.Choice(["scm", "standard"]), default=None, help="Corrected or plain P1.")
@click.option("--mu", type=float, default=None, help="Boundary grading parameter (default 2*pi/omega - 1).")
@click.option("--grading-radius", type=float, default=None, help="Radius of the graded boundary zone.")
@click.option("--tol", type=float, default=None, help="Relative residual tolerance of the linear solver.")
@click.option(
    "--case",
    "case_name",
    type=click.Choice(["paper", "smooth", "linear", "zero"]),
    default=None,
    help="Test case.",
)
@click.option("--data-exponent", type=float, default=None, help="Exponent a of the paper case datum r^a sin(a theta).")
@click.option("--solver", type=click.Choice(["cg", "direct"]), default=None, help="Linear solver.")
@click.option("--out", "out_path", default=None, help="CSV output path.")
@click.option("--full", is_flag=True, default=False, help="Run the full level count.")
@click.option(
    "--alpha-denominator-squared",
    is_flag=True,
    default=False,
    help="Divide alpha_h by the squared norm of p_s^h.",
)
@click.option("--mesh-dump", default=None, help="Directory for per-level mesh dumps.")
@click.option("--progress", is_flag=True, default=False, help="Print step events to stderr.")
@click.option("--config", "config_path", default=None, help="Path to config JSON.")
@click.pass_context
def run(
    ctx: click.Context,
    omega_deg: Optional[float],
    levels: Optional[int],
    method: Optional[str],
    mu: Optional[float],
    grading_radius: Optional[float],
    tol: Optional[float],
    case_name: Optional[str],
    data_exponent: Optional[float],
    solver: Optional[str],
    out_path: Optional[str],
    full: bool,
    alpha_denominator_squared: bool,
    mesh_dump: Optional[str],
    progress: bool,
    config_path: Optional[str],
) -> None:
    app_config = _load_config(config_path)
    study_config = _study_config(
        app_config,
        {
            "omega_deg": omega_deg,
            "levels": levels,
            "method": method,
            "mu": mu,
            "grading_radius": grading_radius,
            "tol": tol,
            "case": case_name,
            "data_exponent": data_exponent,
            "solver": solver,
            "full": full or None,
            "alpha_denominator_squared": alpha_denominator_squared or None,
            "mesh_dump": Path(mesh_dump) if mesh_dump else None,
        },
    )
    out = Path(out_path) if out_path else _default_out(app_config, study_config)
    out.parent.mkdir(parents=True, exist_ok=True)

    def _on_progress(step: str, status: str, message: str, detail: Optional[str]) -> None:
        if progress:
            event = StepEvent(step=step, status=status, message=message, detail=detail)
            click.echo(event.model_dump_json(), err=True)

    click.echo(CSV_HEADER)
    with out.open("w", encoding="utf-8") as handle:
        handle.write(CSV_HEADER + "\n")

        def _on_row(row: ConvergenceRow) -> None:
            line = format_row(row)
            handle.write(line + "\n")
            handle.flush()
            click.echo(line)

        result = run_convergence(study_config, on_progress=_on_progress, on_row=_on_row)

    sidecar = write_sidecar(result.to_report(), out)
    click.echo(f"CSV:         {out}", err=True)
    click.echo(f"Diagnostics: {sidecar}", err=True)
    for row in result.rows:
        if row.status == "failed":
            click.echo(f"Level {row.level} failed: {row.message}", err=True)
    if result.failed:
        ctx.exit(2)


@main.command("table1")
@click.option("--levels", type=int, default=None, help="Number of refinement levels.")
@click.option("--full", is_flag=True, default=False, help="Run the full level count.")
@click.option("--method", type=click.Choice(["scm", "standard"]), default=None, help="Corrected or plain P1.")
@click.option("--out-dir", default=None, help="Directory for the two CSV files.")
@click.option("--config", "config_path", default=None, help="Path to config JSON.")
@click.pass_context
def table1(
    ctx: click.Context,
    levels: Optional[int],
    full: bool,
    method: Optional[str],
    out_dir: Optional[str],
    config_path: Optional[str],
) -> None:
    app_config = _load_config(config_path)
    configs = [
        _study_config(
            app_config,
            {"omega_deg": angle, "levels": levels, "full": full or None, "method": method, "case": "paper"},
        )
        for angle in TABLE_ANGLES
    ]
    target = Path(out_dir) if out_dir else app_config.runs_dir / f"table1_{_stamp()}"
    target.mkdir(parents=True, exist_ok=True)

    workers = min(len(configs), app_config.settings.max_workers)
    reports = asyncio.run(_run_studies(configs, workers))

    columns: dict[str, list[ConvergenceRow]] = {}
    failed = False
    for study_config, report in zip(configs, reports):
        rows = [ConvergenceRow.model_validate(row) for row in report["rows"]]
        label = f"omega = {study_config.omega_deg:g} deg"
        columns[label] = rows
        csv_path = write_csv(rows, target / f"omega_{study_config.omega_deg:g}_{study_config.method}.csv")
        write_sidecar(_report_model(report), csv_path)
        failed = failed or any(row.status == "failed" for row in rows)

    click.echo(format_table(columns))
    click.echo(f"Run dir: {target}", err=True)
    if failed:
        ctx.exit(2)


async def _run_studies(configs: list[StudyConfig], workers: int) -> list[dict[str, Any]]:
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=max(1, workers)) as pool:
        tasks = [
            loop.run_in_executor(pool, _study_worker, config.model_dump(mode="json"))
            for config in configs
        ]
        return list(await asyncio.gather(*tasks))


def _study_worker(config_data: dict[str, Any]) -> dict[str, Any]:
    result = run_convergence(StudyConfig.model_validate(config_data))
    return result.to_report().model_dump(mode="json")


def _report_model(data: dict[str, Any]) -> StudyReport:
    return StudyReport.model_validate(data)


def _load_config(config_path: Optional[str]) -> AppConfig:
    try:
        return load_app_config(Path(config_path) if config_path else None)
    except FileNotFoundError as exc:
        raise click.UsageError(str(exc)) from exc


def _study_config(app_config: AppConfig, overrides: dict[str, Any]) -> StudyConfig:
    try:
        return build_study_config(app_config, overrides)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc


def _default_out(app_config: AppConfig, config: StudyConfig) -> Path:
    name = f"omega_{config.omega_deg:g}_{config.method}_{_stamp()}.csv"
    return app_config.runs_dir / name


def _stamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%d%H%M%S")


if __name__ == "__main__":
    main()
