"""Numerical integration on triangles, near the reentrant corner and along
the boundary.

Triangle rules are given in barycentric coordinates with weights summing to
one; applying a rule multiplies by the triangle area. Integrands with an
r^alpha factor at the corner are handled by dyadic layering in the collapsed
coordinates x = t * (A + s * (B - A)) of a triangle (0, A, B), which keeps a
Gauss rule accurate on every layer for any alpha > -2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations
from typing import Callable, Iterator, Optional

import numpy as np
from scipy.special import roots_jacobi

from .mesh import BoundaryEdges, TriMesh

PointFunction = Callable[[np.ndarray], np.ndarray]

SUPPORTED_ORDERS = (1, 2, 3, 5, 7)
CORNER_TAIL_TOL = 1e-12
# 2^-400 keeps t^alpha finite for every alpha > -2
MAX_CORNER_LAYERS = 400
CORNER_SEGMENT_POINTS = 8
SMALLEST_SEGMENT = np.finfo(float).tiny


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class TriRule:
    points: np.ndarray
    weights: np.ndarray
    order: int

    def __post_init__(self) -> None:
        self.points.flags.writeable = False
        self.weights.flags.writeable = False

    @property
    def size(self) -> int:
        return int(self.weights.size)


@dataclass(frozen=True)
class GradedBoundaryRule:
    """Gauss rule on a graded partition of the boundary polyline.

    Every quadrature point remembers its boundary edge and its parameter
    along that edge, so boundary finite element traces can be evaluated
    without a point search.
    """

    points: np.ndarray
    weights: np.ndarray
    r: np.ndarray
    edge: np.ndarray
    param: np.ndarray
    normals: np.ndarray
    segment_lengths: np.ndarray
    segment_r: np.ndarray
    mu: float
    R: float
    h: float
    points_per_segment: int = 1
    corner_exponent: Optional[float] = None

    @property
    def n_segments(self) -> int:
        return int(self.segment_lengths.size)

    def integrate(self, values: np.ndarray) -> float:
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise QuadratureError("non-finite integrand on the boundary rule")
        return float(np.dot(self.weights, values))


@dataclass(frozen=True)
class QuadChunk:
    """A batch of volume quadrature points: owning element, barycentric
    coordinates in that element's vertex order, physical point, weight."""

    elements: np.ndarray
    bary: np.ndarray
    points: np.ndarray
    weights: np.ndarray


ChunkFunction = Callable[[QuadChunk], np.ndarray]


# -- triangle rules ---------------------------------------------------------


def _orbit3(a: float) -> list[tuple[float, float, float]]:
    c = 1.0 - 2.0 * a
    return [(a, a, c), (a, c, a), (c, a, a)]


def _orbit6(a: float, b: float, c: float) -> list[tuple[float, float, float]]:
    return sorted(set(permutations((a, b, c))))


@lru_cache(maxsize=None)
def tri_rule(order: int) -> TriRule:
    """Symmetric rule with positive weights and at least the requested
    polynomial exactness."""
    if order == 1:
        points = [(1 / 3, 1 / 3, 1 / 3)]
        weights = [1.0]
        exact = 1
    elif order == 2:
        points = [(0.5, 0.5, 0.0), (0.0, 0.5, 0.5), (0.5, 0.0, 0.5)]
        weights = [1 / 3] * 3
        exact = 2
    elif order == 3:
        points = _orbit6(0.659027622374092, 0.231933368553031, 0.109039009072877)
        weights = [1 / 6] * 6
        exact = 3
    elif order == 5:
        sq15 = math.sqrt(15.0)
        a1 = (6.0 - sq15) / 21.0
        a2 = (6.0 + sq15) / 21.0
        points = [(1 / 3, 1 / 3, 1 / 3), *_orbit3(a1), *_orbit3(a2)]
        weights = [9 / 40] + [(155.0 - sq15) / 1200.0] * 3 + [(155.0 + sq15) / 1200.0] * 3
        exact = 5
    elif order == 7:
        # 16-point rule of exactness 8, all weights positive
        points = [(1 / 3, 1 / 3, 1 / 3)]
        weights = [0.144315607677787]
        for a, w in (
            (0.459292588292723, 0.095091634267285),
            (0.170569307751760, 0.103217370534718),
            (0.050547228317031, 0.032458497623198),
        ):
            points += _orbit3(a)
            weights += [w] * 3
        orbit = _orbit6(0.008394777409958, 0.263112829634638, 0.728492392955404)
        points += orbit
        weights += [0.027230314174435] * len(orbit)
        exact = 8
    else:
        raise ValueError(
            f"Triangle quadrature of order {order} not supported (choose from {SUPPORTED_ORDERS})"
        )
    w = np.asarray(weights, dtype=float)
    return TriRule(points=np.asarray(points, dtype=float), weights=w / w.sum(), order=exact)


def triangle_area(tri: np.ndarray) -> float:
    p = np.asarray(tri, dtype=float)
    d1 = p[1] - p[0]
    d2 = p[2] - p[0]
    return 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])


def integrate_triangle(f: PointFunction, tri: np.ndarray, rule: TriRule) -> float:
    corners = np.asarray(tri, dtype=float)
    points = rule.points @ corners
    values = np.asarray(f(points), dtype=float)
    if not np.all(np.isfinite(values)):
        raise QuadratureError("non-finite integrand value at a triangle quadrature point")
    return float(np.dot(rule.weights, values)) * triangle_area(corners)


# -- corner rule --------------------------------------------------------------


def gauss_legendre(n: int, a: float = 0.0, b: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@lru_cache(maxsize=32)
def gauss_jacobi(n: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1] that integrate x^beta * p(x) exactly for
    polynomials p of degree 2n - 1. The weights apply to the full integrand,
    so the rule is used like a plain rule on integrands with an x^beta factor."""
    if beta <= -1.0:
        raise ValueError(f"x^beta is not integrable on [0, 1] for beta={beta!r}")
    y, w = roots_jacobi(n, 0.0, beta)
    x = 0.5 * (y + 1.0)
    weights = 0.5 ** (beta + 1.0) * w * x ** (-beta)
    x.flags.writeable = False
    weights.flags.writeable = False
    return x, weights


def corner_layers(alpha: float, depth_scale: float = 1.0) -> int:
    """Dyadic layers needed before the innermost disc is small enough that the
    integrand there is its leading r^alpha term up to CORNER_TAIL_TOL, which
    shrinks by 2^-(alpha + 2) per layer. Capped at MAX_CORNER_LAYERS."""
    if alpha <= -2.0:
        raise ValueError(f"r^alpha is not integrable in 2D for alpha={alpha!r}")
    layers = math.ceil(math.log2(1.0 / CORNER_TAIL_TOL) / (alpha + 2.0))
    return int(min(MAX_CORNER_LAYERS, max(1, math.ceil(layers * depth_scale))))


@lru_cache(maxsize=64)
def corner_rule(alpha: float, depth_scale: float = 1.0, n: int = 10) -> TriRule:
    """Rule for a triangle whose local vertex 0 is the singular point.

    Gauss layers cover t in [2^-L, 1]. The innermost part t < 2^-L is added in
    closed form for a homogeneous integrand of degree alpha: its points sit on
    t = 2^-L with weights scaled by 2 t^2 / (alpha + 2).
    """
    layers = corner_layers(alpha, depth_scale)
    s, ws = gauss_legendre(n)
    t_nodes = []
    t_weights = []
    for k in range(layers):
        t, wt = gauss_legendre(n, 2.0 ** (-k - 1), 2.0 ** (-k))
        t_nodes.append(t)
        t_weights.append(2.0 * t * wt)
    inner = 2.0 ** (-layers)
    t_nodes.append(np.array([inner]))
    t_weights.append(np.array([2.0 * inner**2 / (alpha + 2.0)]))
    t = np.concatenate(t_nodes)
    wt = np.concatenate(t_weights)

    tt, ss = np.meshgrid(t, s, indexing="ij")
    wtt, wss = np.meshgrid(wt, ws, indexing="ij")
    tt, ss = tt.ravel(), ss.ravel()
    bary = np.column_stack((1.0 - tt, tt * (1.0 - ss), tt * ss))
    weights = wtt.ravel() * wss.ravel()
    return TriRule(points=bary, weights=weights, order=2 * n - 1)


def integrate_corner_triangle(
    f: PointFunction,
    alpha: float,
    tri: np.ndarray,
    depth_scale: float = 1.0,
) -> float:
    corners = np.asarray(tri, dtype=float)
    at_origin = np.flatnonzero(np.all(corners == 0.0, axis=1))
    if at_origin.size != 1:
        raise ValueError("corner integration needs exactly one vertex at the origin")
    j = int(at_origin[0])
    corners = np.roll(corners, -j, axis=0)
    rule = corner_rule(float(alpha), float(depth_scale))
    return integrate_triangle(f, corners, rule)


# -- boundary rule ------------------------------------------------------------


def graded_boundary_rule(
    edges: BoundaryEdges,
    h: float,
    mu: float,
    R: float,
    points_per_segment: int = 1,
    only_edges: Optional[np.ndarray] = None,
    corner_exponent: Optional[float] = None,
) -> GradedBoundaryRule:
    """Gauss-Legendre points on a partition of the boundary graded towards the
    corner. With corner_exponent set, the two segments [0, h^(1/mu)] touching
    the corner use a Gauss-Jacobi rule exact for r^corner_exponent times a
    polynomial."""
    if not (0.0 < mu <= 1.0):
        raise ValueError(f"grading parameter mu must lie in (0, 1], got {mu!r}")
    if not (0.0 < R <= math.sqrt(2.0)):
        raise ValueError(f"grading radius R must lie in (0, sqrt(2)], got {R!r}")
    if h <= 0:
        raise ValueError(f"mesh size must be positive, got {h!r}")
    if corner_exponent is not None and corner_exponent <= -1.0:
        raise ValueError(f"r^{corner_exponent!r} is not integrable along the boundary")

    lo_parts: list[np.ndarray] = []
    hi_parts: list[np.ndarray] = []
    edge_parts: list[np.ndarray] = []
    reversed_parts: list[np.ndarray] = []
    selected = range(len(edges)) if only_edges is None else (int(k) for k in only_edges)
    for k in selected:
        length = float(edges.lengths[k])
        r_min = float(edges.r_min[k])
        # segments are parametrized from an anchor vertex, the corner when the edge touches it
        from_end = False
        if r_min == 0.0:
            rho = _corner_breakpoints(length, h, mu, R)
            lo, hi = rho[:-1] / length, rho[1:] / length
            from_end = bool(np.any(edges.start[k]))
        else:
            pieces = 1 if r_min >= R else math.ceil(length / (h * r_min ** (1.0 - mu)) - 1e-12)
            grid = np.linspace(0.0, 1.0, max(1, pieces) + 1)
            lo, hi = grid[:-1], grid[1:]
        lo_parts.append(lo)
        hi_parts.append(hi)
        edge_parts.append(np.full(lo.size, k, dtype=np.int64))
        reversed_parts.append(np.full(lo.size, from_end))

    seg_lo = np.concatenate(lo_parts)
    seg_hi = np.concatenate(hi_parts)
    seg_edge = np.concatenate(edge_parts)
    seg_reversed = np.concatenate(reversed_parts)
    seg_len = (seg_hi - seg_lo) * edges.lengths[seg_edge]
    anchor = np.where(seg_reversed[:, None], edges.end[seg_edge], edges.start[seg_edge])
    other = np.where(seg_reversed[:, None], edges.start[seg_edge], edges.end[seg_edge])
    seg_r = np.minimum(
        np.linalg.norm(anchor + seg_lo[:, None] * (other - anchor), axis=1),
        np.linalg.norm(anchor + seg_hi[:, None] * (other - anchor), axis=1),
    )

    xi, wi = gauss_legendre(points_per_segment)
    owner = np.repeat(np.arange(seg_lo.size), points_per_segment)
    local = (seg_lo[:, None] + np.outer(seg_hi - seg_lo, xi)).ravel()
    weights = np.outer(seg_len, wi).ravel()
    if corner_exponent is not None:
        singular = np.flatnonzero(seg_r == 0.0)
        kept = ~np.isin(owner, singular)
        xj, wj = gauss_jacobi(CORNER_SEGMENT_POINTS, float(corner_exponent))
        owner = np.concatenate((owner[kept], np.repeat(singular, xj.size)))
        local = np.concatenate((local[kept], np.outer(seg_hi[singular], xj).ravel()))
        weights = np.concatenate((weights[kept], np.outer(seg_len[singular], wj).ravel()))
        order = np.argsort(owner, kind="stable")
        owner, local, weights = owner[order], local[order], weights[order]

    a = anchor[owner]
    b = other[owner]
    points = a + local[:, None] * (b - a)
    param = np.where(seg_reversed[owner], 1.0 - local, local)
    edge_of_point = seg_edge[owner]
    return GradedBoundaryRule(
        points=points,
        weights=weights,
        r=np.linalg.norm(points, axis=1),
        edge=edge_of_point,
        param=param,
        normals=edges.normals[edge_of_point],
        segment_lengths=seg_len,
        segment_r=seg_r,
        mu=float(mu),
        R=float(R),
        h=float(h),
        points_per_segment=points_per_segment,
        corner_exponent=corner_exponent,
    )


def corner_exponent_for(power: float) -> Optional[float]:
    """Exponent for the Gauss-Jacobi corner segments of a boundary integrand
    behaving like r^power, or None when the plain Gauss rule is enough (power
    >= 0) or the integral does not exist (power <= -1)."""
    return float(power) if -1.0 < power < 0.0 else None


def _corner_breakpoints(length: float, h: float, mu: float, R: float) -> np.ndarray:
    """Distances from the corner: first segment h^(1/mu), then h * r^(1 - mu)
    inside the refinement zone and h outside it."""
    first = max(h ** (1.0 / mu), SMALLEST_SEGMENT)
    rho = [0.0]
    current = min(first, length)
    rho.append(current)
    while current < length:
        step = h * current ** (1.0 - mu) if current < R else h
        current = min(length, current + step)
        if length - current < 1e-12 * length:
            current = length
        rho.append(current)
    return np.asarray(rho, dtype=float)


# -- volume quadrature plans --------------------------------------------------


@dataclass
class ElementQuadrature:
    """Volume quadrature over a whole mesh for integrands carrying a corner
    factor r^alpha: collapsed dyadic rule on elements touching the corner,
    a composite rule on their neighbourhood and a plain rule elsewhere."""

    mesh: TriMesh
    alpha: float
    depth_scale: float = 1.0
    far_order: int = 7
    near_levels: int = 3
    near_factor: float = 4.0
    max_points: int = 400_000
    corner_elements: np.ndarray = field(init=False)
    near_elements: np.ndarray = field(init=False)
    far_elements: np.ndarray = field(init=False)
    _corners: np.ndarray = field(init=False, repr=False)
    _areas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        elements = self.mesh.elements
        corner = self.mesh.corner
        touches = np.any(elements == corner, axis=1)
        self._corners = self.mesh.element_points()
        self._areas = np.abs(self.mesh.signed_areas())
        r_vertex = np.linalg.norm(self._corners, axis=2).min(axis=1)
        diameter = self.mesh.edge_lengths().max(axis=1)
        near = (~touches) & (r_vertex < self.near_factor * diameter)
        self.corner_elements = np.flatnonzero(touches)
        self.near_elements = np.flatnonzero(near)
        self.far_elements = np.flatnonzero(~touches & ~near)

    def with_depth(self, depth_scale: float) -> "ElementQuadrature":
        return ElementQuadrature(
            mesh=self.mesh,
            alpha=self.alpha,
            depth_scale=depth_scale,
            far_order=self.far_order,
            near_levels=self.near_levels,
            near_factor=self.near_factor,
            max_points=self.max_points,
        )

    def regular_chunks(self) -> Iterator[QuadChunk]:
        far_rule = tri_rule(self.far_order)
        yield from self._chunks(self.far_elements, far_rule.points, far_rule.weights)
        bary, weights = _composite_rule(self.far_order, self.near_levels)
        yield from self._chunks(self.near_elements, bary, weights)

    def corner_chunks(self) -> Iterator[QuadChunk]:
        rule = corner_rule(float(self.alpha), float(self.depth_scale))
        elements = self.mesh.elements
        for e in self.corner_elements:
            j = int(np.flatnonzero(elements[e] == self.mesh.corner)[0])
            # columns of the rule are (corner, next, next-next) in local order
            bary = np.roll(rule.points, j, axis=1)
            yield from self._chunks(np.array([e]), bary, rule.weights)

    def chunks(self) -> Iterator[QuadChunk]:
        yield from self.regular_chunks()
        yield from self.corner_chunks()

    def integrate_parts(self, integrand: ChunkFunction) -> tuple[float, float]:
        regular = _sum_chunks(self.regular_chunks(), integrand)
        corner = _sum_chunks(self.corner_chunks(), integrand)
        return regular, corner

    def integrate(self, integrand: ChunkFunction) -> float:
        regular, corner = self.integrate_parts(integrand)
        return regular + corner

    def integrate_corner(self, integrand: ChunkFunction) -> float:
        return _sum_chunks(self.corner_chunks(), integrand)

    def load(self, integrand: ChunkFunction) -> np.ndarray:
        """Vector of integrals of integrand * (hat function of node i)."""
        out = np.zeros(self.mesh.n_nodes)
        for chunk in self.chunks():
            values = _checked(integrand(chunk)) * chunk.weights
            nodes = self.mesh.elements[chunk.elements]
            for k in range(3):
                out += np.bincount(nodes[:, k], weights=values * chunk.bary[:, k], minlength=out.size)
        return out

    def _chunks(self, element_ids: np.ndarray, bary: np.ndarray, weights: np.ndarray) -> Iterator[QuadChunk]:
        if element_ids.size == 0:
            return
        npts = weights.size
        per_chunk = max(1, self.max_points // npts)
        for lo in range(0, element_ids.size, per_chunk):
            ids = element_ids[lo : lo + per_chunk]
            corners = self._corners[ids]
            points = np.einsum("qk,ekd->eqd", bary, corners).reshape(-1, 2)
            yield QuadChunk(
                elements=np.repeat(ids, npts),
                bary=np.tile(bary, (ids.size, 1)),
                points=points,
                weights=(self._areas[ids][:, None] * weights[None, :]).ravel(),
            )


def element_quadrature(
    mesh: TriMesh,
    alpha: float,
    depth_scale: float = 1.0,
    far_order: int = 7,
) -> ElementQuadrature:
    return ElementQuadrature(mesh=mesh, alpha=alpha, depth_scale=depth_scale, far_order=far_order)


@lru_cache(maxsize=16)
def _composite_rule(order: int, levels: int) -> tuple[np.ndarray, np.ndarray]:
    """A triangle rule repeated on the 4^levels midpoint-subdivision cells of
    the reference element, in barycentric coordinates of the parent."""
    rule = tri_rule(order)
    cells = [np.eye(3)]
    for _ in range(levels):
        refined = []
        for c in cells:
            m01, m12, m20 = (c[0] + c[1]) / 2, (c[1] + c[2]) / 2, (c[2] + c[0]) / 2
            refined += [
                np.array([c[0], m01, m20]),
                np.array([m01, c[1], m12]),
                np.array([m20, m12, c[2]]),
                np.array([m12, m20, m01]),
            ]
        cells = refined
    bary = np.concatenate([rule.points @ c for c in cells])
    weights = np.tile(rule.weights, len(cells)) / len(cells)
    bary.flags.writeable = False
    weights.flags.writeable = False
    return bary, weights


def _checked(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise QuadratureError("non-finite integrand value at a volume quadrature point")
    return values


def _sum_chunks(chunks: Iterator[QuadChunk], integrand: ChunkFunction) -> float:
    total = 0.0
    for chunk in chunks:
        total += float(np.dot(chunk.weights, _checked(integrand(chunk))))
    return total


def integrate_function(mesh: TriMesh, f: PointFunction, alpha: float = 0.0, plan: Optional[ElementQuadrature] = None) -> float:
    """Integral over the mesh of a pointwise function with at most an r^alpha
    singularity at the corner."""
    plan = plan or element_quadrature(mesh, alpha)
    return plan.integrate(lambda chunk: f(chunk.points))
