"""Regularized Dirichlet datum: L2(Gamma) projection of u onto continuous
piecewise linear boundary functions.

A datum behaving like r^a at the corner is integrated with Gauss-Jacobi points
on the two graded segments touching the corner: exponent a for the load,
2a for norms and errors.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .fem import SparseMatrix
from .logging_utils import log_event, setup_logging
from .mesh import TriMesh, boundary_edges
from .quadrature import (
    GradedBoundaryRule,
    QuadratureError,
    corner_exponent_for,
    gauss_legendre,
    graded_boundary_rule,
)

_logger = setup_logging()

BoundaryFunction = Callable[[np.ndarray], np.ndarray]

EDGE_GAUSS_POINTS = 3


@dataclass(frozen=True)
class BoundaryQuadrature:
    points: np.ndarray
    weights: np.ndarray
    edge: np.ndarray
    param: np.ndarray

    def hat_values(self) -> tuple[np.ndarray, np.ndarray]:
        """Values of the hat functions of the edge's first and second node."""
        return 1.0 - self.param, self.param


@dataclass(frozen=True)
class BoundaryDatum:
    source: BoundaryFunction
    projected: np.ndarray
    l2_norm_estimate: float
    load: np.ndarray
    mesh: TriMesh
    # exponent a of the r^a behaviour of source at the corner
    singular_class: float = 0.0

    def nodal(self) -> np.ndarray:
        """u^h as a full nodal vector, zero at interior nodes."""
        values = np.zeros(self.mesh.n_nodes)
        values[self.mesh.boundary] = self.projected
        return values

    def trace(self, edge: np.ndarray, param: np.ndarray) -> np.ndarray:
        following = (edge + 1) % self.projected.size
        return (1.0 - param) * self.projected[edge] + param * self.projected[following]


def boundary_mass(mesh: TriMesh) -> SparseMatrix:
    edges = boundary_edges(mesh)
    count = len(edges)
    a = np.arange(count)
    b = (a + 1) % count
    lengths = edges.lengths
    rows = np.concatenate((a, b, a, b))
    cols = np.concatenate((a, b, b, a))
    values = np.concatenate((lengths / 3.0, lengths / 3.0, lengths / 6.0, lengths / 6.0))
    matrix = sp.coo_matrix((values, (rows, cols)), shape=(count, count)).tocsr()
    matrix.sum_duplicates()
    return SparseMatrix(matrix, symmetric=True)


def boundary_quadrature(
    mesh: TriMesh,
    graded: GradedBoundaryRule,
    gauss_points: int = EDGE_GAUSS_POINTS,
    corner_power: float = 0.0,
) -> BoundaryQuadrature:
    """Gauss-Legendre points on the graded segments of the two edges touching
    the corner and on every other boundary edge. corner_power is the exponent
    of r in the integrand; the segments at the corner are then Gauss-Jacobi."""
    edges = boundary_edges(mesh)
    corner_edges = np.flatnonzero(edges.r_min == 0.0)
    near = graded_boundary_rule(
        edges,
        graded.h,
        graded.mu,
        graded.R,
        points_per_segment=gauss_points,
        only_edges=corner_edges,
        corner_exponent=corner_exponent_for(corner_power),
    )

    regular = np.setdiff1d(np.arange(len(edges)), corner_edges)
    xi, wi = gauss_legendre(gauss_points)
    param = np.tile(xi, regular.size)
    edge = np.repeat(regular, gauss_points)
    start = edges.start[edge]
    points = start + param[:, None] * (edges.end[edge] - start)
    weights = np.outer(edges.lengths[regular], wi).ravel()
    return BoundaryQuadrature(
        points=np.concatenate((near.points, points)),
        weights=np.concatenate((near.weights, weights)),
        edge=np.concatenate((near.edge, edge)),
        param=np.concatenate((near.param, param)),
    )


def _sample(u: BoundaryFunction, quad: BoundaryQuadrature) -> np.ndarray:
    values = np.asarray(u(quad.points), dtype=float).reshape(-1)
    if not np.all(np.isfinite(values)):
        raise QuadratureError("boundary datum is not finite at a quadrature point")
    return values


def l2_project_boundary(
    u: BoundaryFunction,
    mesh: TriMesh,
    graded: GradedBoundaryRule,
    singular_class: float = 0.0,
) -> BoundaryDatum:
    quad = boundary_quadrature(mesh, graded, corner_power=singular_class)
    values = _sample(u, quad)
    count = mesh.boundary.size
    first, second = quad.hat_values()
    weighted = quad.weights * values
    load = np.bincount(quad.edge, weights=weighted * first, minlength=count)
    load += np.bincount((quad.edge + 1) % count, weights=weighted * second, minlength=count)

    mass = boundary_mass(mesh)
    projected = np.asarray(spsolve(mass.matrix.tocsc(), load))
    norm = estimate_l2_norm(u, mesh, graded, singular_class=singular_class)
    log_event(
        _logger,
        "boundary.projected",
        boundary_nodes=count,
        quadrature_points=int(quad.weights.size),
        l2_norm=norm,
    )
    return BoundaryDatum(
        source=u,
        projected=projected,
        l2_norm_estimate=norm,
        load=load,
        mesh=mesh,
        singular_class=singular_class,
    )


def estimate_l2_norm(
    u: BoundaryFunction,
    mesh: TriMesh,
    graded: GradedBoundaryRule,
    gauss_points: int = EDGE_GAUSS_POINTS,
    singular_class: float = 0.0,
) -> float:
    quad = boundary_quadrature(mesh, graded, gauss_points, corner_power=2.0 * singular_class)
    return float(np.sqrt(np.dot(quad.weights, _sample(u, quad) ** 2)))


def boundary_l2_norm(datum: BoundaryDatum) -> float:
    """||u^h||_{L2(Gamma)}, exact for piecewise linears."""
    mass = boundary_mass(datum.mesh)
    return float(np.sqrt(max(mass.quadratic_form(datum.projected), 0.0)))


def boundary_l2_error(datum: BoundaryDatum, graded: GradedBoundaryRule) -> float:
    quad = boundary_quadrature(datum.mesh, graded, corner_power=2.0 * datum.singular_class)
    diff = _sample(datum.source, quad) - datum.trace(quad.edge, quad.param)
    return float(np.sqrt(np.dot(quad.weights, diff**2)))
