"""Computational domain, polar coordinates at the reentrant corner and the
two analytic corner singular functions r^(+-lambda) sin(lambda theta)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

ANGLE_SNAP = 1e-12
_SQUARE_CORNERS = (
    (math.pi / 4, (1.0, 1.0)),
    (3 * math.pi / 4, (-1.0, 1.0)),
    (5 * math.pi / 4, (-1.0, -1.0)),
    (7 * math.pi / 4, (1.0, -1.0)),
)


@dataclass(frozen=True)
class PolygonalDomain:
    omega: float
    lam: float
    vertices: tuple[tuple[float, float], ...]
    corner_index: int = 0

    @property
    def is_nonconvex(self) -> bool:
        return self.omega > math.pi

    @property
    def vertex_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    @property
    def area(self) -> float:
        xy = self.vertex_array
        x, y = xy[:, 0], xy[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @property
    def perimeter(self) -> float:
        xy = self.vertex_array
        return float(np.linalg.norm(np.roll(xy, -1, axis=0) - xy, axis=1).sum())


@dataclass(frozen=True)
class SingularTerm:
    """coefficient * r^(exponent_sign * lambda) * sin(lambda * theta)."""

    exponent_sign: int
    coefficient: float = 1.0

    def __post_init__(self) -> None:
        if self.exponent_sign not in (1, -1):
            raise ValueError(f"exponent_sign must be +1 or -1, got {self.exponent_sign}")

    def scaled(self, factor: float) -> "SingularTerm":
        return SingularTerm(self.exponent_sign, self.coefficient * factor)


PRIMAL = SingularTerm(1, 1.0)
DUAL = SingularTerm(-1, 1.0)


class PolarPoint(NamedTuple):
    r: float
    theta: float
    in_sector: bool


def make_domain(omega: float) -> PolygonalDomain:
    if not (0.0 < omega < 2 * math.pi):
        raise ValueError(f"omega must lie in (0, 2*pi), got {omega!r}")

    vertices: list[tuple[float, float]] = [(0.0, 0.0), (1.0, 0.0)]
    for angle, corner in _SQUARE_CORNERS:
        if angle < omega - ANGLE_SNAP:
            vertices.append(corner)
    end = square_ray_point(omega)
    if not _same_point(end, vertices[-1]):
        vertices.append(end)

    return PolygonalDomain(
        omega=float(omega),
        lam=math.pi / omega,
        vertices=tuple(vertices),
        corner_index=0,
    )


def make_domain_deg(omega_deg: float) -> PolygonalDomain:
    return make_domain(omega_deg * math.pi / 180.0)


def square_ray_point(theta: float) -> tuple[float, float]:
    """Intersection of the ray of angle theta with the boundary of [-1, 1]^2."""
    c, s = math.cos(theta), math.sin(theta)
    scale = max(abs(c), abs(s))
    return (_clean(c / scale), _clean(s / scale))


def polar_coordinates(domain: PolygonalDomain, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized polar coordinates; theta in [0, 2*pi) with values near 0 and
    omega snapped onto the boundary rays."""
    xy = np.asarray(points, dtype=float).reshape(-1, 2)
    r = np.hypot(xy[:, 0], xy[:, 1])
    theta = np.arctan2(xy[:, 1], xy[:, 0])
    theta = np.where(theta < 0.0, theta + 2 * math.pi, theta)
    theta = np.where(theta > 2 * math.pi - ANGLE_SNAP, 0.0, theta)
    theta = np.where(np.abs(theta - domain.omega) <= ANGLE_SNAP, domain.omega, theta)
    return r, theta


def polar_of(domain: PolygonalDomain, p: tuple[float, float]) -> PolarPoint:
    r, theta = polar_coordinates(domain, np.asarray(p, dtype=float))
    t = float(theta[0])
    return PolarPoint(float(r[0]), t, t <= domain.omega)


def in_domain(domain: PolygonalDomain, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    xy = np.asarray(points, dtype=float).reshape(-1, 2)
    _, theta = polar_coordinates(domain, xy)
    in_square = np.all(np.abs(xy) <= 1.0 + tol, axis=1)
    at_corner = np.hypot(xy[:, 0], xy[:, 1]) <= tol
    return in_square & ((theta <= domain.omega + tol) | at_corner)


def eval_singular(domain: PolygonalDomain, term: SingularTerm, points: np.ndarray) -> np.ndarray:
    r, theta = polar_coordinates(domain, points)
    lam = domain.lam
    if term.exponent_sign < 0:
        if np.any(r == 0.0):
            raise ValueError("dual singular function evaluated at the corner")
        radial = r ** (-lam)
    else:
        radial = r**lam
    return term.coefficient * radial * np.sin(lam * theta)


def primal_gradient(domain: PolygonalDomain, points: np.ndarray) -> np.ndarray:
    """Cartesian gradient of r^lambda sin(lambda theta)."""
    r, theta = polar_coordinates(domain, points)
    if np.any(r == 0.0):
        raise ValueError("primal singular gradient is singular at the corner")
    lam = domain.lam
    scale = lam * r ** (lam - 1.0)
    return np.column_stack(
        (scale * np.sin((lam - 1.0) * theta), scale * np.cos((lam - 1.0) * theta))
    )


def normal_derivative_primal(
    domain: PolygonalDomain, points: np.ndarray, normals: np.ndarray
) -> np.ndarray:
    grad = primal_gradient(domain, points)
    n = np.asarray(normals, dtype=float).reshape(-1, 2)
    return np.einsum("ij,ij->i", grad, n)


def _same_point(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return abs(a[0] - b[0]) <= ANGLE_SNAP and abs(a[1] - b[1]) <= ANGLE_SNAP


def _clean(value: float) -> float:
    # snap onto the square sides and the axes
    if abs(abs(value) - 1.0) <= ANGLE_SNAP:
        return math.copysign(1.0, value)
    return 0.0 if abs(value) <= ANGLE_SNAP else value
