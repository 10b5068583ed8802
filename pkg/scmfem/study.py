from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .boundary_data import EDGE_GAUSS_POINTS, boundary_l2_error, l2_project_boundary
from .cases import Case, make_case
from .convergence import eoc, l2_error
from .fem import Discretization, load_vector
from .geometry import PolygonalDomain, SingularTerm, make_domain
from .logging_utils import log_event, setup_logging
from .mesh import TriMesh, boundary_edges, dump_mesh, initial_triangulation, refine_uniform
from .quadrature import graded_boundary_rule
from .schemas import ConvergenceRow, LevelDiagnostics, StudyConfig, StudyReport
from .singular_complement import AugmentedFunction, SingularWorkspace, solve_corrected

STUDY_STEPS = (
    "mesh",
    "boundary_data",
    "fe_solve",
    "dual_singular",
    "phi",
    "coefficients",
    "error",
)

ProgressCallback = Callable[[str, str, str, Optional[str]], None]
RowCallback = Callable[[ConvergenceRow], None]


@dataclass
class StudyResult:
    config: StudyConfig
    rows: list[ConvergenceRow] = field(default_factory=list)
    diagnostics: list[LevelDiagnostics] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return any(row.status == "failed" for row in self.rows)

    def to_report(self) -> StudyReport:
        return StudyReport(config=self.config, rows=self.rows, diagnostics=self.diagnostics)


def run_convergence(
    config: StudyConfig,
    on_progress: Optional[ProgressCallback] = None,
    on_row: Optional[RowCallback] = None,
) -> StudyResult:
    """One row per level; a failing level yields a diagnostic row and stops
    the refinement."""
    logger = setup_logging()

    def _emit(step: str, status: str, message: str, detail: Optional[str] = None) -> None:
        if on_progress:
            on_progress(step, status, message, detail)

    domain = make_domain(config.omega)
    case = make_case(config.case, config.omega, config.data_exponent)
    result = StudyResult(config=config)
    mesh: Optional[TriMesh] = None
    previous: Optional[ConvergenceRow] = None

    for level in range(config.effective_levels):
        started = time.perf_counter()
        h_nominal = config.h0 * 2.0 ** (-level)
        current = {"step": "mesh"}

        def _step(name: str) -> None:
            _emit(current["step"], "completed", f"level {level}: {current['step']} done")
            current["step"] = name
            _emit(name, "running", f"level {level}: {name}")

        try:
            _emit("mesh", "running", f"level {level}: building mesh")
            mesh = initial_triangulation(domain, config.h0) if mesh is None else refine_uniform(mesh)
            if config.mesh_dump is not None:
                path = dump_mesh(mesh, Path(config.mesh_dump) / f"level_{level}.mesh")
                _emit("mesh", "running", "mesh written", str(path))
            row, diagnostics = _run_level(config, domain, case, mesh, level, h_nominal, previous, _step)
        except Exception as exc:
            _emit(current["step"], "failed", f"level {level}: {exc}")
            log_event(logger, "study.failed", level=level, step=current["step"], error=str(exc))
            row = ConvergenceRow(
                level=level,
                h_nominal=h_nominal,
                h_measured=mesh.h if mesh is not None else 0.0,
                dofs=mesh.n_nodes if mesh is not None else 0,
                method=config.method,
                runtime_ms=(time.perf_counter() - started) * 1000.0,
                status="failed",
                message=f"{current['step']}: {exc}",
            )
            result.rows.append(row)
            result.diagnostics.append(LevelDiagnostics(level=level))
            if on_row:
                on_row(row)
            break

        row = row.model_copy(update={"runtime_ms": (time.perf_counter() - started) * 1000.0})
        _emit("error", "completed", f"level {level}: error {row.error_l2}")
        log_event(
            logger,
            "study.level",
            level=level,
            h=row.h_measured,
            dofs=row.dofs,
            error_l2=row.error_l2,
            eoc=row.eoc,
        )
        result.rows.append(row)
        result.diagnostics.append(diagnostics)
        if on_row:
            on_row(row)
        previous = row

    log_event(
        logger,
        "study.completed",
        omega_deg=config.omega_deg,
        method=config.method,
        levels=len(result.rows),
        failed=result.failed,
    )
    return result


def _run_level(
    config: StudyConfig,
    domain: PolygonalDomain,
    case: Case,
    mesh: TriMesh,
    level: int,
    h_nominal: float,
    previous: Optional[ConvergenceRow],
    step: Callable[[str], None],
) -> tuple[ConvergenceRow, LevelDiagnostics]:
    step("boundary_data")
    graded = graded_boundary_rule(
        boundary_edges(mesh),
        mesh.h,
        config.effective_mu,
        config.grading_radius,
        points_per_segment=EDGE_GAUSS_POINTS,
    )
    datum = l2_project_boundary(case.u, mesh, graded, singular_class=case.singular_strength)
    diagnostics = LevelDiagnostics(
        level=level,
        boundary_l2_error=boundary_l2_error(datum, graded),
        graded_segments=graded.n_segments,
    )

    if config.method == "scm":
        workspace = SingularWorkspace.build(
            mesh, domain, tol=config.tol, solver=config.solver, depth_scale=config.quad_depth_scale
        )
        corrected = solve_corrected(
            workspace,
            datum,
            case.f,
            graded,
            squared_denominator=config.alpha_denominator_squared,
            on_step=step,
        )
        approx = corrected.z_h
        diagnostics = diagnostics.model_copy(
            update={**corrected.coefficients.as_dict(), "cg_iterations": corrected.solver_iterations}
        )
    else:
        step("fe_solve")
        disc = Discretization(mesh, tol=config.tol, solver=config.solver)
        y_h = disc.solve(load_vector(mesh, case.f) if case.f is not None else None, datum.projected)
        approx = AugmentedFunction(y_h, SingularTerm(-1, 0.0), domain)
        diagnostics = diagnostics.model_copy(update={"cg_iterations": list(disc.iterations)})

    step("error")
    error = None
    if case.exact is not None:
        error = l2_error(approx, case.exact, case.singular_strength, depth_scale=config.quad_depth_scale)
    rate = None
    if previous is not None and previous.error_l2 and error:
        rate = eoc(previous.error_l2, error, previous.h_nominal, h_nominal)

    row = ConvergenceRow(
        level=level,
        h_nominal=h_nominal,
        h_measured=mesh.h,
        dofs=mesh.n_nodes,
        method=config.method,
        error_l2=error,
        eoc=rate,
    )
    return row, diagnostics
