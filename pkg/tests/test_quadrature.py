"""Triangle rules, the corner rule for r^alpha integrands and the graded
boundary rule."""
from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import segment_edges
from scmfem.geometry import DUAL, eval_singular
from scmfem.mesh import boundary_edges, fan_triangulation
from scmfem.quadrature import (
    MAX_CORNER_LAYERS,
    SUPPORTED_ORDERS,
    ElementQuadrature,
    QuadratureError,
    corner_exponent_for,
    corner_layers,
    gauss_jacobi,
    gauss_legendre,
    graded_boundary_rule,
    integrate_corner_triangle,
    integrate_function,
    integrate_triangle,
    tri_rule,
)

REFERENCE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def _sector_oracle(omega: float, radial_power: float, angular) -> float:
    """Integral over the fan polygon of r^radial_power * angular(theta): the
    radial part is integrated in closed form up to the square boundary."""

    def integrand(theta: float) -> float:
        rho = 1.0 / max(abs(math.cos(theta)), abs(math.sin(theta)))
        return angular(theta) * rho ** (radial_power + 2.0) / (radial_power + 2.0)

    breaks = [k * math.pi / 4 for k in range(1, 8) if k * math.pi / 4 < omega]
    value, _ = quad(integrand, 0.0, omega, points=breaks, epsabs=1e-14, epsrel=1e-13, limit=200)
    return value


@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test__weights_are_positive_and_normalized(order):
    rule = tri_rule(order)
    assert rule.order >= order
    assert np.all(rule.weights > 0.0)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(rule.points >= 0.0)
    np.testing.assert_allclose(rule.points.sum(axis=1), 1.0, atol=1e-15)


@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test__monomials_are_integrated_exactly(order):
    rule = tri_rule(order)
    for degree in range(rule.order + 1):
        for a in range(degree + 1):
            b = degree - a
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            value = integrate_triangle(lambda p: p[:, 0] ** a * p[:, 1] ** b, REFERENCE, rule)
            assert value == pytest.approx(exact, abs=1e-13)


def test__unsupported_order_is_rejected():
    with pytest.raises(ValueError):
        tri_rule(4)


def test__integrate_triangle_examples():
    assert integrate_triangle(lambda p: p[:, 0] + p[:, 1], REFERENCE, tri_rule(2)) == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert integrate_triangle(lambda p: p[:, 0] ** 2 * p[:, 1], REFERENCE, tri_rule(3)) == pytest.approx(1.0 / 60.0, abs=1e-15)


def test__non_finite_integrand_is_an_error():
    with pytest.raises(QuadratureError):
        integrate_triangle(lambda p: np.full(p.shape[0], np.nan), REFERENCE, tri_rule(1))


def test__gauss_legendre_on_an_interval():
    x, w = gauss_legendre(3, 1.0, 3.0)
    assert w.sum() == pytest.approx(2.0, rel=1e-15)
    assert float(np.dot(w, x**5)) == pytest.approx((3.0**6 - 1.0) / 6.0, rel=1e-14)


def test__corner_rule_reproduces_the_area():
    tri = np.array([[0.0, 0.0], [0.3, 0.1], [-0.2, 0.4]])
    value = integrate_corner_triangle(lambda p: np.ones(p.shape[0]), -1.0, tri)
    assert value == pytest.approx(0.5 * (0.3 * 0.4 + 0.1 * 0.2), rel=1e-10)


def test__corner_rule_accepts_the_origin_at_any_vertex():
    tri = np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.0]])
    f = lambda p: np.hypot(p[:, 0], p[:, 1]) ** -1.5
    forward = integrate_corner_triangle(f, -1.5, tri)
    rolled = integrate_corner_triangle(f, -1.5, np.roll(tri, 1, axis=0))
    assert forward == pytest.approx(rolled, rel=1e-12)


def test__corner_rule_needs_exactly_one_vertex_at_the_origin():
    with pytest.raises(ValueError):
        integrate_corner_triangle(lambda p: np.ones(p.shape[0]), -1.0, np.array([[0.1, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        corner_layers(-2.0)


def test__corner_rule_on_a_smooth_integrand_matches_the_plain_rule():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    f = lambda p: np.cos(p[:, 0]) * np.exp(p[:, 1])
    plain = integrate_triangle(f, tri, tri_rule(7))
    assert integrate_corner_triangle(f, 0.0, tri) == pytest.approx(plain, abs=1e-10)


def test__corner_rule_is_stable_under_depth_doubling():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    f = lambda p: np.hypot(p[:, 0], p[:, 1]) ** -1.9
    base = integrate_corner_triangle(f, -1.9, tri)
    deeper = integrate_corner_triangle(f, -1.9, tri, depth_scale=2.0)
    assert abs(deeper - base) <= 1e-10 * abs(deeper)


@pytest.mark.parametrize("alpha", [-1.9, -1.99])
def test__corner_rule_near_the_integrability_limit_matches_the_closed_form(alpha):
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    f = lambda p: np.hypot(p[:, 0], p[:, 1]) ** alpha
    # r from 0 to sec(theta) in polar coordinates
    exact, _ = quad(lambda t: math.cos(t) ** -(alpha + 2.0) / (alpha + 2.0), 0.0, math.pi / 4, epsabs=0.0, epsrel=1e-14)
    for depth in (1.0, 2.0, 4.0):
        assert corner_layers(alpha, depth) <= MAX_CORNER_LAYERS
        assert integrate_corner_triangle(f, alpha, tri, depth_scale=depth) == pytest.approx(exact, rel=1e-10)


def test__dual_singular_square_over_the_fan_matches_the_angular_oracle(l_domain):
    mesh = fan_triangulation(l_domain)
    lam = l_domain.lam
    total = 0.0
    for tri in mesh.element_points():
        total += integrate_corner_triangle(
            lambda p: eval_singular(l_domain, DUAL, p) ** 2, -2.0 * lam, tri
        )
    oracle = _sector_oracle(l_domain.omega, -2.0 * lam, lambda t: math.sin(lam * t) ** 2)
    assert total == pytest.approx(oracle, rel=1e-8)


def test__element_quadrature_plan_matches_the_angular_oracle(l_domain, l_meshes):
    lam = l_domain.lam
    plan = ElementQuadrature(l_meshes[1], -2.0 * lam)
    assert plan.corner_elements.size > 0
    assert plan.near_elements.size > 0
    value = plan.integrate(lambda chunk: eval_singular(l_domain, DUAL, chunk.points) ** 2)
    oracle = _sector_oracle(l_domain.omega, -2.0 * lam, lambda t: math.sin(lam * t) ** 2)
    assert value == pytest.approx(oracle, rel=1e-6)


def test__element_load_sums_to_the_integral(l_domain, l_meshes):
    plan = ElementQuadrature(l_meshes[0], -l_domain.lam)
    f = lambda chunk: eval_singular(l_domain, DUAL, chunk.points)
    assert plan.load(f).sum() == pytest.approx(plan.integrate(f), rel=1e-12)


def test__integrate_function_area(l_domain, l_meshes):
    value = integrate_function(l_meshes[0], lambda p: np.ones(p.shape[0]))
    assert value == pytest.approx(l_domain.area, rel=1e-12)


# -- graded boundary rule ----------------------------------------------------


def test__graded_rule_integrates_one_to_the_perimeter(l_domain, l_meshes):
    mesh = l_meshes[1]
    rule = graded_boundary_rule(boundary_edges(mesh), mesh.h, 1.0 / 3.0, 0.1)
    assert rule.integrate(np.ones(rule.weights.size)) == pytest.approx(l_domain.perimeter, rel=1e-12)
    assert np.all(rule.weights > 0.0)
    assert np.all(rule.r > 0.0)


def test__graded_rule_with_mu_one_is_the_edge_midpoint_rule():
    h = 1.0 / 16.0
    edges = segment_edges(1.0, 16)
    rule = graded_boundary_rule(edges, h, 1.0, 0.1)
    assert rule.n_segments == len(edges)
    np.testing.assert_allclose(rule.points[:, 0], (np.arange(16) + 0.5) * h, rtol=1e-14)


def test__graded_segments_follow_the_grading_function():
    h, mu, R = 1.0 / 64.0, 1.0 / 3.0, 0.1
    rule = graded_boundary_rule(segment_edges(1.0, 64), h, mu, R)
    first = rule.segment_lengths[rule.segment_r == 0.0]
    assert first.size == 1
    assert first[0] <= h ** (1.0 / mu) * (1.0 + 1e-12)
    graded = (rule.segment_r > 0.0) & (rule.segment_r < R)
    bound = h * rule.segment_r[graded] ** (1.0 - mu)
    assert np.all(rule.segment_lengths[graded] <= bound * (1.0 + 1e-9))
    assert np.all(rule.segment_lengths[rule.segment_r >= R] <= h * (1.0 + 1e-9))


def test__graded_segment_count_grows_slower_than_h_to_the_minus_six_fifths():
    for pieces in (32, 64, 128, 256):
        h = 1.0 / pieces
        rule = graded_boundary_rule(segment_edges(1.0, pieces), h, 1.0 / 3.0, 0.1)
        assert rule.n_segments * h**1.2 <= 5.0


def test__graded_rule_converges_for_a_corner_power():
    """The first segment [0, h^(1/mu)] is left to a single midpoint, so the
    relative error of r^(2 mu - 1 + eps) decays like h^(1/2)."""
    exponent = -0.8332
    exact = 1.0 / (exponent + 1.0)
    errors = []
    for pieces in (64, 128, 256):
        rule = graded_boundary_rule(segment_edges(1.0, pieces), 1.0 / pieces, 1.0 / 3.0, 0.1)
        errors.append(abs(rule.integrate(rule.r**exponent) - exact) / exact)
    assert errors[1] <= 0.1
    assert errors[1] / errors[0] <= 0.8
    assert errors[2] / errors[1] <= 0.8


@pytest.mark.parametrize("corner_exponent", [None, -0.8332])
def test__graded_rule_points_carry_their_edge_parameters(l_meshes, corner_exponent):
    mesh = l_meshes[0]
    edges = boundary_edges(mesh)
    rule = graded_boundary_rule(edges, mesh.h, 1.0 / 3.0, 0.1, points_per_segment=3, corner_exponent=corner_exponent)
    start = edges.start[rule.edge]
    rebuilt = start + rule.param[:, None] * (edges.end[rule.edge] - start)
    np.testing.assert_allclose(rebuilt, rule.points, atol=1e-14)
    assert np.all((rule.param > 0.0) & (rule.param < 1.0))


def test__graded_rule_rejects_bad_parameters():
    edges = segment_edges(1.0, 4)
    with pytest.raises(ValueError):
        graded_boundary_rule(edges, 0.25, 0.0, 0.1)
    with pytest.raises(ValueError):
        graded_boundary_rule(edges, 0.25, 0.5, 2.0)
    with pytest.raises(ValueError):
        graded_boundary_rule(edges, 0.0, 0.5, 0.1)


@pytest.mark.parametrize("beta", [-0.9998, -0.8332, -0.4999, 0.5])
def test__gauss_jacobi_is_exact_for_weighted_polynomials(beta):
    x, w = gauss_jacobi(8, beta)
    assert np.all((x > 0.0) & (x < 1.0))
    assert np.all(w > 0.0)
    for k in range(16):
        assert float(np.dot(w, x ** (beta + k))) == pytest.approx(1.0 / (beta + k + 1.0), rel=1e-10)


def test__corner_segments_integrate_a_boundary_power_exactly():
    exponent = -0.8332
    exact = 1.0 / (exponent + 1.0)
    h = 1.0 / 64.0
    edges = segment_edges(1.0, 64)
    plain = graded_boundary_rule(edges, h, 1.0 / 3.0, 0.1, points_per_segment=3)
    jacobi = graded_boundary_rule(edges, h, 1.0 / 3.0, 0.1, points_per_segment=3, corner_exponent=exponent)
    assert jacobi.n_segments == plain.n_segments
    assert jacobi.corner_exponent == exponent
    assert jacobi.integrate(jacobi.r**exponent) == pytest.approx(exact, rel=1e-4)
    assert abs(plain.integrate(plain.r**exponent) - exact) > 100.0 * abs(jacobi.integrate(jacobi.r**exponent) - exact)


def test__corner_segments_leave_the_measure_unchanged(l_domain, l_meshes):
    mesh = l_meshes[1]
    rule = graded_boundary_rule(boundary_edges(mesh), mesh.h, 1.0 / 3.0, 0.1, points_per_segment=3, corner_exponent=-0.5)
    assert rule.integrate(np.ones(rule.weights.size)) == pytest.approx(l_domain.perimeter, rel=1e-6)
    assert np.all(rule.weights > 0.0)


def test__corner_exponent_selection():
    assert corner_exponent_for(-0.4999) == -0.4999
    assert corner_exponent_for(0.0) is None
    assert corner_exponent_for(-1.0) is None
    with pytest.raises(ValueError):
        graded_boundary_rule(segment_edges(1.0, 4), 0.25, 0.5, 0.1, corner_exponent=-1.0)
    with pytest.raises(ValueError):
        gauss_jacobi(4, -1.0)
