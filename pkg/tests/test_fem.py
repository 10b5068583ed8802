"""P1 assembly, boundary lifting, the Jacobi-preconditioned CG solver and the
Dirichlet solve."""
from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import random_interior_points, single_triangle
from scmfem.cases import linear_case, smooth_case
from scmfem.convergence import eoc, l2_error
from scmfem.fem import (
    Discretization,
    FeFunction,
    SolverError,
    assemble_mass,
    assemble_stiffness,
    cg_solve,
    element_gradients,
    interpolate,
    lift_boundary,
    load_vector,
    solve_dirichlet,
)
from scmfem.geometry import SingularTerm
from scmfem.mesh import TriMesh, refine_uniform
from scmfem.singular_complement import AugmentedFunction


def _laplacian_1d(n: int) -> sp.csr_matrix:
    return sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsr()


def _boundary_trace(mesh: TriMesh, f) -> np.ndarray:
    return f(mesh.nodes[mesh.boundary])


def test__reference_element_matrices():
    mesh = single_triangle([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)])
    stiffness = assemble_stiffness(mesh).matrix.toarray()
    np.testing.assert_allclose(
        stiffness, 0.5 * np.array([[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]]), atol=1e-15
    )
    mass = assemble_mass(mesh).matrix.toarray()
    np.testing.assert_allclose(mass, np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 24.0, atol=1e-15)


def test__stiffness_rows_sum_to_zero(l_meshes):
    for mesh in l_meshes[:3]:
        stiffness = assemble_stiffness(mesh)
        assert np.max(np.abs(stiffness.row_sums())) <= 1e-12
        assert abs(stiffness.matrix - stiffness.matrix.T).max() <= 1e-14


def test__energy_of_x1_is_the_area(l_domain, l_meshes):
    for mesh in l_meshes[:3]:
        x1 = interpolate(mesh, lambda p: p[:, 0])
        assert assemble_stiffness(mesh).quadratic_form(x1.coefficients) == pytest.approx(l_domain.area, rel=1e-12)


def test__mass_of_one_is_the_area(l_domain, l_meshes):
    mesh = l_meshes[1]
    ones = np.ones(mesh.n_nodes)
    assert assemble_mass(mesh).quadratic_form(ones) == pytest.approx(l_domain.area, rel=1e-12)
    assert load_vector(mesh, lambda p: np.ones(p.shape[0])).sum() == pytest.approx(l_domain.area, rel=1e-12)
    assert not load_vector(mesh, None).any()


def test__degenerate_element_is_rejected():
    mesh = single_triangle([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)])
    with pytest.raises(ValueError):
        element_gradients(mesh)


def test__fe_function_checks():
    mesh = single_triangle([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)])
    with pytest.raises(ValueError):
        FeFunction(mesh, np.zeros(4))
    u = FeFunction(mesh, np.array([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        u.evaluate(np.array([[2.0, 2.0]]))
    assert u.evaluate(np.array([[0.25, 0.25]]))[0] == pytest.approx(1.75, abs=1e-15)
    finer = refine_uniform(mesh)
    other = FeFunction(finer, np.zeros(finer.n_nodes))
    with pytest.raises(ValueError):
        u + other


def test__evaluate_reproduces_linear_functions(l_domain, l_meshes):
    mesh = l_meshes[1]
    u = interpolate(mesh, lambda p: 2.0 * p[:, 0] - p[:, 1] + 0.5)
    points = random_interior_points(l_domain, 50)
    np.testing.assert_allclose(u.evaluate(points), 2.0 * points[:, 0] - points[:, 1] + 0.5, atol=1e-13)


def test__lift_of_zero_is_zero(l_meshes):
    mesh = l_meshes[0]
    assert not lift_boundary(mesh, np.zeros(mesh.boundary.size)).coefficients.any()
    with pytest.raises(ValueError):
        lift_boundary(mesh, np.zeros(mesh.boundary.size + 1))


def test__lift_of_one_has_energy_growing_like_one_over_h(l_meshes):
    energies = []
    for mesh in l_meshes[:3]:
        lifted = lift_boundary(mesh, np.ones(mesh.boundary.size))
        energies.append(assemble_stiffness(mesh).quadratic_form(lifted.coefficients))
    for coarse, fine in zip(energies, energies[1:]):
        assert 1.6 <= fine / coarse <= 2.4


def test__cg_on_a_diagonal_system():
    result = cg_solve(sp.diags([1.0, 2.0, 4.0]).tocsr(), np.array([1.0, 1.0, 1.0]))
    np.testing.assert_allclose(result.solution, [1.0, 0.5, 0.25], rtol=1e-14)
    assert result.iterations <= 1


def test__cg_matches_a_dense_solve():
    A = _laplacian_1d(10)
    b = np.arange(1.0, 11.0)
    result = cg_solve(A, b, tol=1e-14)
    np.testing.assert_allclose(result.solution, np.linalg.solve(A.toarray(), b), rtol=1e-12)
    assert result.residual <= 1e-14


def test__cg_energy_decreases_monotonically():
    A = _laplacian_1d(50)
    result = cg_solve(A, np.sin(np.arange(50.0)), tol=1e-12)
    energies = np.array(result.energies)
    assert np.all(np.diff(energies) <= 1e-12 * np.abs(energies[:-1]).max())


def test__cg_reports_non_convergence():
    with pytest.raises(SolverError) as info:
        cg_solve(_laplacian_1d(10), np.ones(10), tol=1e-14, max_iter=1)
    assert info.value.iterations == 1
    assert info.value.residual > 1e-14


def test__cg_with_zero_right_hand_side():
    result = cg_solve(_laplacian_1d(5), np.zeros(5))
    assert result.iterations == 0
    assert not result.solution.any()


def test__dirichlet_solve_reproduces_a_linear_function(l_meshes):
    case = linear_case(1.5 * math.pi)
    for mesh in l_meshes[:3]:
        y_h = solve_dirichlet(mesh, None, _boundary_trace(mesh, case.u))
        np.testing.assert_allclose(y_h.coefficients, mesh.nodes[:, 0], atol=1e-9)


def test__dirichlet_solve_with_zero_data(l_meshes):
    mesh = l_meshes[1]
    y_h = solve_dirichlet(mesh, None, np.zeros(mesh.boundary.size))
    assert np.max(np.abs(y_h.coefficients)) == 0.0


def test__galerkin_residual_is_at_solver_tolerance(l_meshes):
    mesh = l_meshes[2]
    case = smooth_case(1.5 * math.pi)
    disc = Discretization(mesh, tol=1e-12)
    g = _boundary_trace(mesh, case.u)
    y_h = disc.solve(None, g)
    residual = (disc.stiffness @ y_h.coefficients)[disc.interior]
    rhs = -(disc.stiffness.block(disc.interior, mesh.boundary) @ g)
    assert np.linalg.norm(residual) <= 10.0 * 1e-12 * np.linalg.norm(rhs)
    assert disc.iterations and disc.iterations[-1] > 0


def test__direct_and_cg_solvers_agree(l_meshes):
    mesh = l_meshes[1]
    g = _boundary_trace(mesh, smooth_case(1.5 * math.pi).u)
    iterative = Discretization(mesh, solver="cg").solve(None, g)
    direct = Discretization(mesh, solver="direct").solve(None, g)
    np.testing.assert_allclose(iterative.coefficients, direct.coefficients, atol=1e-9)


def test__unknown_solver_is_rejected(l_meshes):
    with pytest.raises(ValueError):
        Discretization(l_meshes[0], solver="multigrid")


def test__smooth_harmonic_solution_converges_at_second_order(l_domain, l_meshes):
    case = smooth_case(l_domain.omega)
    errors, sizes = [], []
    for level, mesh in enumerate(l_meshes):
        y_h = solve_dirichlet(mesh, None, _boundary_trace(mesh, case.u))
        approx = AugmentedFunction(y_h, SingularTerm(-1, 0.0), l_domain)
        errors.append(l2_error(approx, case.exact))
        sizes.append(0.25 * 2.0**-level)
    rates = [eoc(errors[i], errors[i + 1], sizes[i], sizes[i + 1]) for i in range(len(errors) - 1)]
    assert rates[-1] >= 1.5
