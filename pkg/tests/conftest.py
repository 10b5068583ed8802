from __future__ import annotations

import math

import numpy as np
import pytest

from scmfem.geometry import in_domain, make_domain
from scmfem.mesh import BoundaryEdges, TriMesh, _seed_refinement_edges, initial_triangulation, refine_uniform

L_OMEGA = 1.5 * math.pi


@pytest.fixture(scope="session")
def l_domain():
    return make_domain(L_OMEGA)


@pytest.fixture(scope="session")
def quadrant_domain():
    return make_domain(0.5 * math.pi)


@pytest.fixture(scope="session")
def l_meshes(l_domain):
    """Study levels 0..3 of the 270 degree domain (h0 = 0.25)."""
    meshes = [initial_triangulation(l_domain, 0.25)]
    for _ in range(3):
        meshes.append(refine_uniform(meshes[-1]))
    return meshes


@pytest.fixture(scope="session")
def quadrant_meshes(quadrant_domain):
    meshes = [initial_triangulation(quadrant_domain, math.sqrt(2.0))]
    for _ in range(3):
        meshes.append(refine_uniform(meshes[-1]))
    return meshes


def single_triangle(vertices) -> TriMesh:
    nodes = np.asarray(vertices, dtype=float)
    elements = np.array([[0, 1, 2]], dtype=np.int64)
    return TriMesh(
        nodes=nodes,
        elements=elements,
        refinement_edge=_seed_refinement_edges(nodes, elements),
        boundary=np.arange(3, dtype=np.int64),
    )


def segment_edges(length: float, pieces: int) -> BoundaryEdges:
    """Straight polyline from the origin along the positive x axis."""
    x = np.linspace(0.0, length, pieces + 1)
    start = np.column_stack((x[:-1], np.zeros(pieces)))
    end = np.column_stack((x[1:], np.zeros(pieces)))
    return BoundaryEdges(
        node_a=np.arange(pieces),
        node_b=np.arange(1, pieces + 1),
        start=start,
        end=end,
        lengths=end[:, 0] - start[:, 0],
        r_min=start[:, 0].copy(),
        normals=np.tile([0.0, -1.0], (pieces, 1)),
    )


def random_interior_points(domain, count: int, seed: int = 7, r_min: float = 0.05) -> np.ndarray:
    rng = np.random.default_rng(seed)
    found = []
    while len(found) < count:
        candidate = rng.uniform(-0.98, 0.98, size=(4 * count, 2))
        keep = in_domain(domain, candidate) & (np.hypot(candidate[:, 0], candidate[:, 1]) >= r_min)
        # stay off the theta = omega ray
        theta = np.mod(np.arctan2(candidate[:, 1], candidate[:, 0]), 2 * math.pi)
        keep &= (theta > 0.02) & (theta < domain.omega - 0.02)
        found.extend(candidate[keep].tolist())
    return np.asarray(found[:count])
