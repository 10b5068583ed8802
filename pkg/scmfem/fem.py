"""P1 finite elements: assembly, nodal boundary lifting, Dirichlet solves by
block elimination and a Jacobi-preconditioned conjugate gradient solver."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .logging_utils import log_event, setup_logging
from .mesh import TriMesh, locate_points
from .quadrature import tri_rule

_logger = setup_logging()

DEFAULT_TOL = 1e-12
MIN_ELEMENT_AREA = 1e-14
SOLVERS = ("cg", "direct")

PointFunction = Callable[[np.ndarray], np.ndarray]


class SolverError(RuntimeError):
    def __init__(self, message: str, iterations: int, residual: float) -> None:
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class SparseMatrix:
    matrix: sp.csr_matrix
    symmetric: bool = True

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def indptr(self) -> np.ndarray:
        return self.matrix.indptr

    @property
    def indices(self) -> np.ndarray:
        return self.matrix.indices

    @property
    def data(self) -> np.ndarray:
        return self.matrix.data

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def quadratic_form(self, x: np.ndarray) -> float:
        return float(x @ (self.matrix @ x))

    def block(self, rows: np.ndarray, cols: np.ndarray) -> "SparseMatrix":
        sub = self.matrix[rows][:, cols].tocsr()
        return SparseMatrix(sub, symmetric=self.symmetric and np.array_equal(rows, cols))


@dataclass(frozen=True)
class FeFunction:
    mesh: TriMesh
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        if self.coefficients.shape != (self.mesh.n_nodes,):
            raise ValueError(
                f"expected {self.mesh.n_nodes} nodal coefficients, got shape {self.coefficients.shape}"
            )

    def values_at(self, elements: np.ndarray, bary: np.ndarray) -> np.ndarray:
        nodes = self.mesh.elements[elements]
        return np.einsum("ek,ek->e", self.coefficients[nodes], bary)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        elements, bary = locate_points(self.mesh, points)
        if np.any(elements < 0):
            raise ValueError(f"{int(np.sum(elements < 0))} evaluation points lie outside the mesh")
        return self.values_at(elements, bary)

    def boundary_values(self) -> np.ndarray:
        return self.coefficients[self.mesh.boundary]

    def scaled(self, factor: float) -> "FeFunction":
        return FeFunction(self.mesh, factor * self.coefficients)

    def __add__(self, other: "FeFunction") -> "FeFunction":
        _check_same_mesh(self.mesh, other.mesh)
        return FeFunction(self.mesh, self.coefficients + other.coefficients)

    def __sub__(self, other: "FeFunction") -> "FeFunction":
        _check_same_mesh(self.mesh, other.mesh)
        return FeFunction(self.mesh, self.coefficients - other.coefficients)


@dataclass(frozen=True)
class CgResult:
    solution: np.ndarray
    iterations: int
    residual: float
    energies: list[float] = field(default_factory=list)


def _check_same_mesh(a: TriMesh, b: TriMesh) -> None:
    if a is not b and (a.n_nodes != b.n_nodes or not np.array_equal(a.elements, b.elements)):
        raise ValueError("finite element functions live on different meshes")


def element_gradients(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Constant gradients of the three barycentric hat functions per element
    (shape (M, 3, 2)) and the element areas."""
    p = mesh.element_points()
    areas = mesh.signed_areas()
    small = np.flatnonzero(areas < MIN_ELEMENT_AREA)
    if small.size:
        raise ValueError(
            f"degenerate element {int(small[0])} with area {float(areas[small[0]]):.3e}"
        )
    x, y = p[..., 0], p[..., 1]
    grads = np.empty(p.shape)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        grads[:, i, 0] = y[:, j] - y[:, k]
        grads[:, i, 1] = x[:, k] - x[:, j]
    grads /= (2.0 * areas)[:, None, None]
    return grads, areas


def _assemble(mesh: TriMesh, local: np.ndarray) -> SparseMatrix:
    rows = np.repeat(mesh.elements, 3, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 3)).ravel()
    n = mesh.n_nodes
    matrix = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    matrix.sum_duplicates()
    return SparseMatrix(matrix, symmetric=True)


def assemble_stiffness(mesh: TriMesh) -> SparseMatrix:
    grads, areas = element_gradients(mesh)
    local = np.einsum("eid,ejd->eij", grads, grads) * areas[:, None, None]
    return _assemble(mesh, local)


def assemble_mass(mesh: TriMesh) -> SparseMatrix:
    _, areas = element_gradients(mesh)
    pattern = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = areas[:, None, None] * pattern[None, :, :]
    return _assemble(mesh, local)


def lift_boundary(mesh: TriMesh, g: np.ndarray) -> FeFunction:
    """B_h g: boundary nodes take g (given in boundary polyline order),
    interior nodes 0."""
    values = np.asarray(g, dtype=float)
    if values.shape != mesh.boundary.shape:
        raise ValueError(
            f"expected {mesh.boundary.size} boundary values, got shape {values.shape}"
        )
    coefficients = np.zeros(mesh.n_nodes)
    coefficients[mesh.boundary] = values
    return FeFunction(mesh, coefficients)


def interpolate(mesh: TriMesh, f: PointFunction) -> FeFunction:
    return FeFunction(mesh, np.asarray(f(mesh.nodes), dtype=float).reshape(-1))


def load_vector(mesh: TriMesh, f: Optional[PointFunction]) -> np.ndarray:
    """(f, phi_i) for every node, order-5 rule on each element."""
    if f is None:
        return np.zeros(mesh.n_nodes)
    rule = tri_rule(5)
    corners = mesh.element_points()
    points = np.einsum("qk,ekd->eqd", rule.points, corners)
    values = np.asarray(f(points.reshape(-1, 2)), dtype=float).reshape(points.shape[:2])
    areas = np.abs(mesh.signed_areas())
    local = np.einsum("eq,q,qk->ek", values, rule.weights, rule.points) * areas[:, None]
    return np.bincount(mesh.elements.ravel(), weights=local.ravel(), minlength=mesh.n_nodes)


def cg_solve(
    A: Union[SparseMatrix, sp.spmatrix, np.ndarray],
    b: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: Optional[int] = None,
    x0: Optional[np.ndarray] = None,
) -> CgResult:
    matrix = A.matrix if isinstance(A, SparseMatrix) else sp.csr_matrix(A)
    rhs = np.asarray(b, dtype=float)
    n = matrix.shape[0]
    limit = max_iter if max_iter is not None else max(1, math.ceil(20.0 * math.sqrt(n)))

    diag = matrix.diagonal()
    if np.any(diag <= 0):
        raise ValueError("matrix has non-positive diagonal entries; it is not SPD")
    inv_diag = 1.0 / diag

    b_norm = float(np.linalg.norm(rhs))
    if b_norm == 0.0:
        return CgResult(solution=np.zeros(n), iterations=0, residual=0.0)

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = rhs - matrix @ x
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    residual = float(np.linalg.norm(r)) / b_norm
    energies: list[float] = []
    if residual <= tol:
        return CgResult(solution=x, iterations=0, residual=residual)

    for iteration in range(1, limit + 1):
        Ap = matrix @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise SolverError("matrix is not positive definite on the solved block", iteration, residual)
        step = rz / pAp
        x += step * p
        r -= step * Ap
        energies.append(-0.5 * float(x @ (rhs + r)))
        residual = float(np.linalg.norm(r)) / b_norm
        if residual <= tol:
            log_event(_logger, "cg.converged", n=n, iterations=iteration, residual=residual)
            return CgResult(solution=x, iterations=iteration, residual=residual, energies=energies)
        z = inv_diag * r
        rz_next = float(r @ z)
        p = z + (rz_next / rz) * p
        rz = rz_next

    log_event(_logger, "cg.failed", n=n, iterations=limit, residual=residual)
    raise SolverError(
        f"CG did not converge in {limit} iterations (relative residual {residual:.3e})",
        limit,
        residual,
    )


@dataclass
class Discretization:
    """Assembled operators of one mesh plus the Dirichlet solve used for y_h
    and the two auxiliary problems in Y_0h."""

    mesh: TriMesh
    tol: float = DEFAULT_TOL
    solver: str = "cg"
    max_iter: Optional[int] = None
    iterations: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.solver not in SOLVERS:
            raise ValueError(f"Unknown solver {self.solver!r} (choose from {SOLVERS})")

    @cached_property
    def stiffness(self) -> SparseMatrix:
        return assemble_stiffness(self.mesh)

    @cached_property
    def mass(self) -> SparseMatrix:
        return assemble_mass(self.mesh)

    @cached_property
    def interior(self) -> np.ndarray:
        return self.mesh.interior_nodes

    @cached_property
    def _interior_block(self) -> SparseMatrix:
        return self.stiffness.block(self.interior, self.interior)

    @cached_property
    def _coupling_block(self) -> SparseMatrix:
        return self.stiffness.block(self.interior, self.mesh.boundary)

    def solve(self, load: Optional[np.ndarray], boundary_values: np.ndarray) -> FeFunction:
        """Boundary nodes take boundary_values (polyline order); interior rows
        solve A_II x_I = load_I - A_IB g."""
        lifted = lift_boundary(self.mesh, boundary_values).coefficients
        rhs = -(self._coupling_block @ lifted[self.mesh.boundary])
        if load is not None:
            rhs = rhs + np.asarray(load, dtype=float)[self.interior]

        if self.solver == "direct":
            interior_values = np.asarray(spsolve(self._interior_block.matrix.tocsc(), rhs))
            self.iterations.append(0)
        else:
            result = cg_solve(self._interior_block, rhs, tol=self.tol, max_iter=self.max_iter)
            interior_values = result.solution
            self.iterations.append(result.iterations)

        coefficients = lifted.copy()
        coefficients[self.interior] = interior_values
        return FeFunction(self.mesh, coefficients)

    def solve_homogeneous(self, load: np.ndarray) -> FeFunction:
        return self.solve(load, np.zeros(self.mesh.boundary.size))


def solve_dirichlet(
    mesh: TriMesh,
    load: Optional[np.ndarray],
    g: np.ndarray,
    tol: float = DEFAULT_TOL,
    solver: str = "cg",
    discretization: Optional[Discretization] = None,
) -> FeFunction:
    disc = discretization or Discretization(mesh, tol=tol, solver=solver)
    return disc.solve(load, g)
