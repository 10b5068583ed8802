"""Dual singular complement correction of the P1 solution.

The correction runs in three steps on a fixed mesh:

1. project the boundary datum, solve for y_h;
2. compute the discrete dual singular function p_s^h = p~_h + r^-lambda sin(lambda theta),
   beta_h and phi_s^h = phi~_h + beta_h r^lambda sin(lambda theta);
3. compute gamma_h and alpha_h, set delta_h = alpha_h - gamma_h and
   z_h = y_h + delta_h p_s^h.

All inner products involving the analytic singular terms use the corner-aware
element quadrature; inner products of two finite element functions use the
assembled mass matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .boundary_data import BoundaryDatum
from .fem import Discretization, FeFunction, lift_boundary, load_vector
from .geometry import DUAL, PRIMAL, PolygonalDomain, SingularTerm, eval_singular, normal_derivative_primal
from .logging_utils import log_event, setup_logging
from .mesh import TriMesh, boundary_edges
from .quadrature import (
    ElementQuadrature,
    GradedBoundaryRule,
    QuadChunk,
    QuadratureError,
    corner_exponent_for,
    graded_boundary_rule,
)

_logger = setup_logging()

PointFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class AugmentedFunction:
    fe_part: FeFunction
    singular: SingularTerm
    domain: PolygonalDomain

    @property
    def mesh(self) -> TriMesh:
        return self.fe_part.mesh

    def singular_values(self, points: np.ndarray) -> np.ndarray:
        if self.singular.coefficient == 0.0:
            return np.zeros(np.asarray(points).reshape(-1, 2).shape[0])
        return eval_singular(self.domain, self.singular, points)

    def values_at(self, chunk: QuadChunk) -> np.ndarray:
        return self.fe_part.values_at(chunk.elements, chunk.bary) + self.singular_values(chunk.points)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return self.fe_part.evaluate(points) + self.singular_values(points)

    def scaled(self, factor: float) -> "AugmentedFunction":
        return AugmentedFunction(self.fe_part.scaled(factor), self.singular.scaled(factor), self.domain)

    def __add__(self, other: "AugmentedFunction") -> "AugmentedFunction":
        if self.singular.exponent_sign != other.singular.exponent_sign:
            raise ValueError("cannot add augmented functions with different singular exponents")
        singular = SingularTerm(
            self.singular.exponent_sign,
            self.singular.coefficient + other.singular.coefficient,
        )
        return AugmentedFunction(self.fe_part + other.fe_part, singular, self.domain)


@dataclass(frozen=True)
class CorrectionCoefficients:
    beta_h: float
    gamma_h: float
    alpha_h: float
    delta_h: float
    ps_norm_sq: float

    def as_dict(self) -> dict[str, float]:
        return {
            "beta_h": self.beta_h,
            "gamma_h": self.gamma_h,
            "alpha_h": self.alpha_h,
            "delta_h": self.delta_h,
            "ps_norm_sq": self.ps_norm_sq,
        }


@dataclass
class SingularWorkspace:
    """Per-mesh cache of assembled operators and the singular integrals that
    every coefficient needs."""

    mesh: TriMesh
    domain: PolygonalDomain
    discretization: Discretization
    depth_scale: float = 1.0

    @classmethod
    def build(
        cls,
        mesh: TriMesh,
        domain: PolygonalDomain,
        tol: float = 1e-12,
        solver: str = "cg",
        depth_scale: float = 1.0,
    ) -> "SingularWorkspace":
        return cls(mesh, domain, Discretization(mesh, tol=tol, solver=solver), depth_scale)

    @cached_property
    def dual_plan(self) -> ElementQuadrature:
        return ElementQuadrature(self.mesh, -self.domain.lam, depth_scale=self.depth_scale)

    @cached_property
    def dual_load(self) -> np.ndarray:
        """(r^-lambda sin(lambda theta), phi_i) for every node."""
        return self.dual_plan.load(lambda chunk: eval_singular(self.domain, DUAL, chunk.points))

    @cached_property
    def dual_norm_sq(self) -> float:
        plan = ElementQuadrature(self.mesh, -2.0 * self.domain.lam, depth_scale=self.depth_scale)
        return plan.integrate(lambda chunk: eval_singular(self.domain, DUAL, chunk.points) ** 2)

    @cached_property
    def dual_trace_lift(self) -> FeFunction:
        return lift_boundary(self.mesh, _singular_trace(self.mesh, self.domain, DUAL))

    @cached_property
    def primal_trace_lift(self) -> FeFunction:
        return lift_boundary(self.mesh, _singular_trace(self.mesh, self.domain, PRIMAL))

    def cross_with_dual(self, fe: FeFunction) -> float:
        return float(fe.coefficients @ self.dual_load)

    def inner_with_ps(self, fe: FeFunction, ps: AugmentedFunction) -> float:
        """(fe, p_s^h) = (fe, p~_h) + c (fe, r^-lambda sin(lambda theta))."""
        mass = self.discretization.mass
        return float(fe.coefficients @ (mass @ ps.fe_part.coefficients)) + ps.singular.coefficient * self.cross_with_dual(fe)


def _singular_trace(mesh: TriMesh, domain: PolygonalDomain, term: SingularTerm) -> np.ndarray:
    """Nodal boundary values of a singular function; zero at the corner."""
    points = mesh.nodes[mesh.boundary]
    values = np.zeros(points.shape[0])
    away = np.hypot(points[:, 0], points[:, 1]) > 0.0
    values[away] = eval_singular(domain, term, points[away])
    return values


def _require_nonconvex(domain: PolygonalDomain) -> None:
    if domain.lam >= 1.0:
        raise ValueError(
            f"no dual singular function for a convex corner (omega={domain.omega!r}, lambda={domain.lam!r})"
        )


def _workspace(mesh: TriMesh, domain: PolygonalDomain, workspace: Optional[SingularWorkspace]) -> SingularWorkspace:
    if workspace is None:
        return SingularWorkspace.build(mesh, domain)
    if workspace.mesh is not mesh:
        raise ValueError("workspace was built for a different mesh")
    return workspace


def compute_dual_singular(
    mesh: TriMesh,
    domain: PolygonalDomain,
    workspace: Optional[SingularWorkspace] = None,
) -> AugmentedFunction:
    """p_s^h with finite element part p~_h = p*_h - r_h."""
    _require_nonconvex(domain)
    ws = _workspace(mesh, domain, workspace)
    r_h = ws.dual_trace_lift
    p_star = ws.discretization.solve_homogeneous(ws.discretization.stiffness @ r_h.coefficients)
    return AugmentedFunction(p_star - r_h, DUAL, domain)


def augmented_norm_sq(ps: AugmentedFunction, workspace: Optional[SingularWorkspace] = None) -> float:
    """||fe||^2 + 2 c (fe, s) + c^2 ||s||^2 for a dual-type augmented function."""
    ws = _workspace(ps.mesh, ps.domain, workspace)
    c = ps.singular.coefficient
    fe = ps.fe_part
    value = ws.discretization.mass.quadratic_form(fe.coefficients)
    value += 2.0 * c * ws.cross_with_dual(fe) + c * c * ws.dual_norm_sq
    if not math.isfinite(value) or value < 0.0:
        raise QuadratureError(f"computed squared L2 norm is not a non-negative number: {value!r}")
    return float(value)


def compute_beta(ps: AugmentedFunction, workspace: Optional[SingularWorkspace] = None) -> float:
    return augmented_norm_sq(ps, workspace) / math.pi


def compute_phi(
    mesh: TriMesh,
    domain: PolygonalDomain,
    ps: AugmentedFunction,
    beta_h: float,
    workspace: Optional[SingularWorkspace] = None,
) -> AugmentedFunction:
    """phi_s^h with finite element part phi~_h = phi*_h - beta_h s_h."""
    ws = _workspace(mesh, domain, workspace)
    disc = ws.discretization
    s_h = ws.primal_trace_lift
    load = disc.mass @ ps.fe_part.coefficients + ps.singular.coefficient * ws.dual_load
    load = load + beta_h * (disc.stiffness @ s_h.coefficients)
    phi_star = disc.solve_homogeneous(load)
    return AugmentedFunction(phi_star - s_h.scaled(beta_h), PRIMAL.scaled(beta_h), domain)


def compute_gamma(
    y_h: FeFunction,
    ps: AugmentedFunction,
    workspace: Optional[SingularWorkspace] = None,
    ps_norm_sq: Optional[float] = None,
) -> float:
    ws = _workspace(y_h.mesh, ps.domain, workspace)
    norm_sq = ps_norm_sq if ps_norm_sq is not None else augmented_norm_sq(ps, ws)
    if norm_sq <= 0.0:
        raise ValueError("dual singular function has zero norm")
    return ws.inner_with_ps(y_h, ps) / norm_sq


def compute_alpha(
    datum: BoundaryDatum,
    f: Optional[PointFunction],
    ps: AugmentedFunction,
    phi: AugmentedFunction,
    beta_h: float,
    graded: GradedBoundaryRule,
    workspace: Optional[SingularWorkspace] = None,
    ps_norm_sq: Optional[float] = None,
    squared_denominator: bool = False,
) -> float:
    """alpha_h = [(B_h u^h, p_s^h) - (grad B_h u^h, grad phi~_h)
    - beta_h (u, d_n r^lambda sin(lambda theta))_Gamma + (f, phi_s^h)] / ||p_s^h||^2.

    The boundary term integrates the original datum u on the graded rule,
    with Gauss-Jacobi points for r^(a + lambda - 1) on the segments at the corner.
    """
    ws = _workspace(ps.mesh, ps.domain, workspace)
    disc = ws.discretization
    norm_sq = ps_norm_sq if ps_norm_sq is not None else augmented_norm_sq(ps, ws)
    if norm_sq <= 0.0:
        raise ValueError("dual singular function has zero norm")

    lifted = lift_boundary(ws.mesh, datum.projected)
    volume = ws.inner_with_ps(lifted, ps)
    energy = float(lifted.coefficients @ (disc.stiffness @ phi.fe_part.coefficients))

    rule = graded_boundary_rule(
        boundary_edges(ws.mesh),
        graded.h,
        graded.mu,
        graded.R,
        points_per_segment=graded.points_per_segment,
        corner_exponent=corner_exponent_for(datum.singular_class + ps.domain.lam - 1.0),
    )
    u_values = np.asarray(datum.source(rule.points), dtype=float).reshape(-1)
    flux = normal_derivative_primal(ps.domain, rule.points, rule.normals)
    boundary = beta_h * rule.integrate(u_values * flux)

    source = 0.0
    if f is not None:
        source = float(load_vector(ws.mesh, f) @ phi.fe_part.coefficients)
        primal_plan = ElementQuadrature(ws.mesh, 0.0, depth_scale=ws.depth_scale)
        source += phi.singular.coefficient * primal_plan.integrate(
            lambda chunk: f(chunk.points) * eval_singular(ps.domain, PRIMAL, chunk.points)
        )

    numerator = volume - energy - boundary + source
    denominator = norm_sq**2 if squared_denominator else norm_sq
    return numerator / denominator


def projected_solution(y_h: FeFunction, ps: AugmentedFunction, gamma_h: float) -> AugmentedFunction:
    """Pi_R^h y_h = y_h - gamma_h p_s^h."""
    neutral = AugmentedFunction(y_h, SingularTerm(ps.singular.exponent_sign, 0.0), ps.domain)
    return neutral + ps.scaled(-gamma_h)


def corrected_solution(y_h: FeFunction, ps: AugmentedFunction, coeffs: CorrectionCoefficients) -> AugmentedFunction:
    """z_h = (y_h + delta_h p~_h) + delta_h r^-lambda sin(lambda theta)."""
    if y_h.mesh is not ps.mesh:
        raise ValueError("y_h and p_s^h live on different meshes")
    z_tilde = y_h + ps.fe_part.scaled(coeffs.delta_h)
    return AugmentedFunction(z_tilde, ps.singular.scaled(coeffs.delta_h), ps.domain)


@dataclass(frozen=True)
class CorrectionResult:
    y_h: FeFunction
    ps: AugmentedFunction
    phi: AugmentedFunction
    z_h: AugmentedFunction
    coefficients: CorrectionCoefficients
    solver_iterations: list[int] = field(default_factory=list)


def solve_corrected(
    workspace: SingularWorkspace,
    datum: BoundaryDatum,
    f: Optional[PointFunction],
    graded: GradedBoundaryRule,
    squared_denominator: bool = False,
    on_step: Optional[Callable[[str], None]] = None,
) -> CorrectionResult:
    """Steps 1 to 3 for one mesh, given the projected datum."""
    def _step(name: str) -> None:
        if on_step:
            on_step(name)

    mesh, domain = workspace.mesh, workspace.domain
    disc = workspace.discretization

    _step("fe_solve")
    y_h = disc.solve(load_vector(mesh, f) if f is not None else None, datum.projected)

    _step("dual_singular")
    ps = compute_dual_singular(mesh, domain, workspace)
    ps_norm_sq = augmented_norm_sq(ps, workspace)
    beta_h = ps_norm_sq / math.pi

    _step("phi")
    phi = compute_phi(mesh, domain, ps, beta_h, workspace)

    _step("coefficients")
    gamma_h = compute_gamma(y_h, ps, workspace, ps_norm_sq=ps_norm_sq)
    alpha_h = compute_alpha(
        datum,
        f,
        ps,
        phi,
        beta_h,
        graded,
        workspace,
        ps_norm_sq=ps_norm_sq,
        squared_denominator=squared_denominator,
    )
    coefficients = CorrectionCoefficients(
        beta_h=beta_h,
        gamma_h=gamma_h,
        alpha_h=alpha_h,
        delta_h=alpha_h - gamma_h,
        ps_norm_sq=ps_norm_sq,
    )
    log_event(_logger, "scm.coefficients", level=mesh.level, **coefficients.as_dict())
    return CorrectionResult(
        y_h=y_h,
        ps=ps,
        phi=phi,
        z_h=corrected_solution(y_h, ps, coefficients),
        coefficients=coefficients,
        solver_iterations=list(disc.iterations),
    )
