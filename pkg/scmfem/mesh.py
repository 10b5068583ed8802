"""Conforming triangulations of the corner domain: fan triangulation from the
reentrant corner, uniform newest vertex bisection, boundary queries and a
plain-text dump format."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry import PolygonalDomain
from .logging_utils import log_event, setup_logging

_logger = setup_logging()


@dataclass(frozen=True)
class TriMesh:
    nodes: np.ndarray
    elements: np.ndarray
    refinement_edge: np.ndarray
    boundary: np.ndarray
    level: int = 0

    def __post_init__(self) -> None:
        for array in (self.nodes, self.elements, self.refinement_edge, self.boundary):
            array.flags.writeable = False

    @property
    def corner(self) -> int:
        return int(self.boundary[0])

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def n_elements(self) -> int:
        return int(self.elements.shape[0])

    @property
    def h(self) -> float:
        return mesh_size(self)

    @property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary] = False
        return np.flatnonzero(mask)

    def element_points(self) -> np.ndarray:
        """Vertex coordinates per element, shape (M, 3, 2)."""
        return self.nodes[self.elements]

    def signed_areas(self) -> np.ndarray:
        p = self.element_points()
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_lengths(self) -> np.ndarray:
        """Edge lengths per element; column i is the edge opposite vertex i."""
        p = self.element_points()
        return np.stack(
            (
                np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
                np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
                np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
            ),
            axis=1,
        )

    def unique_edges(self) -> np.ndarray:
        edges = np.concatenate(
            (self.elements[:, [1, 2]], self.elements[:, [2, 0]], self.elements[:, [0, 1]])
        )
        return np.unique(np.sort(edges, axis=1), axis=0)


@dataclass(frozen=True)
class BoundaryEdges:
    node_a: np.ndarray
    node_b: np.ndarray
    start: np.ndarray
    end: np.ndarray
    lengths: np.ndarray
    r_min: np.ndarray
    normals: np.ndarray

    def __len__(self) -> int:
        return int(self.node_a.shape[0])

    def rows(self) -> list[tuple[int, int, float, float]]:
        return [
            (int(a), int(b), float(length), float(r))
            for a, b, length, r in zip(self.node_a, self.node_b, self.lengths, self.r_min)
        ]


def fan_triangulation(domain: PolygonalDomain) -> TriMesh:
    """Triangles (corner, v_i, v_i+1) over consecutive polygon vertices; the
    domain is star-shaped with respect to the corner."""
    nodes = domain.vertex_array
    elements = np.array([(0, i, i + 1) for i in range(1, len(nodes) - 1)], dtype=np.int64)
    return TriMesh(
        nodes=nodes,
        elements=elements,
        refinement_edge=_seed_refinement_edges(nodes, elements),
        boundary=np.arange(len(nodes), dtype=np.int64),
        level=0,
    )


def initial_triangulation(domain: PolygonalDomain, h0: float) -> TriMesh:
    if h0 <= 0:
        raise ValueError(f"h0 must be positive, got {h0!r}")

    mesh = fan_triangulation(domain)
    while mesh_size(mesh) > h0 * (1.0 + 1e-12):
        mesh = refine_uniform(mesh)
    return mesh


def refine_uniform(mesh: TriMesh) -> TriMesh:
    """Bisect every element twice. After the second bisection all three edges
    of a parent are halved, so the child mesh is conforming."""
    n = mesh.n_nodes
    local = _normalized_elements(mesh)
    v0, v1, v2 = local[:, 0], local[:, 1], local[:, 2]

    edge_pairs = np.concatenate((np.stack((v1, v2), 1), np.stack((v0, v1), 1), np.stack((v2, v0), 1)))
    edge_pairs = np.sort(edge_pairs, axis=1)
    keys = edge_pairs[:, 0] * n + edge_pairs[:, 1]
    unique_keys, inverse = np.unique(keys, return_inverse=True)
    midpoint_ids = n + inverse.reshape(3, -1)
    m, p, q = midpoint_ids[0], midpoint_ids[1], midpoint_ids[2]

    a = unique_keys // n
    b = unique_keys % n
    new_nodes = np.concatenate((mesh.nodes, 0.5 * (mesh.nodes[a] + mesh.nodes[b])))

    # newest vertex first; the refinement edge is opposite local vertex 0
    children = np.stack(
        (
            np.stack((p, m, v0), 1),
            np.stack((p, v1, m), 1),
            np.stack((q, m, v2), 1),
            np.stack((q, v0, m), 1),
        ),
        axis=1,
    ).reshape(-1, 3)

    boundary = mesh.boundary
    nxt = np.roll(boundary, -1)
    pair = np.sort(np.stack((boundary, nxt), 1), axis=1)
    mids = n + np.searchsorted(unique_keys, pair[:, 0] * n + pair[:, 1])
    new_boundary = np.stack((boundary, mids), 1).reshape(-1)

    refined = TriMesh(
        nodes=new_nodes,
        elements=children.astype(np.int64),
        refinement_edge=np.zeros(children.shape[0], dtype=np.int8),
        boundary=new_boundary.astype(np.int64),
        level=mesh.level + 1,
    )
    log_event(
        _logger,
        "mesh.refined",
        level=refined.level,
        nodes=refined.n_nodes,
        elements=refined.n_elements,
    )
    return refined


def refine_to_level(mesh: TriMesh, sweeps: int) -> TriMesh:
    for _ in range(sweeps):
        mesh = refine_uniform(mesh)
    return mesh


def mesh_size(mesh: TriMesh) -> float:
    return float(mesh.edge_lengths().max())


def boundary_edges(mesh: TriMesh) -> BoundaryEdges:
    a = mesh.boundary
    b = np.roll(a, -1)
    start = mesh.nodes[a]
    end = mesh.nodes[b]
    tangent = end - start
    lengths = np.linalg.norm(tangent, axis=1)
    # counterclockwise traversal: the outward normal is the tangent turned right
    normals = np.column_stack((tangent[:, 1], -tangent[:, 0])) / lengths[:, None]
    r_min = np.minimum(np.linalg.norm(start, axis=1), np.linalg.norm(end, axis=1))
    return BoundaryEdges(
        node_a=a.copy(),
        node_b=b,
        start=start,
        end=end,
        lengths=lengths,
        r_min=r_min,
        normals=normals,
    )


def shape_ratios(mesh: TriMesh) -> np.ndarray:
    """Diameter over inradius per element."""
    lengths = mesh.edge_lengths()
    inradius = 2.0 * mesh.signed_areas() / lengths.sum(axis=1)
    return lengths.max(axis=1) / inradius


def min_angles(mesh: TriMesh) -> np.ndarray:
    lengths = mesh.edge_lengths()
    a, b, c = lengths[:, 0], lengths[:, 1], lengths[:, 2]
    cos_a = (b**2 + c**2 - a**2) / (2 * b * c)
    cos_b = (a**2 + c**2 - b**2) / (2 * a * c)
    cos_c = (a**2 + b**2 - c**2) / (2 * a * b)
    angles = np.arccos(np.clip(np.stack((cos_a, cos_b, cos_c), 1), -1.0, 1.0))
    return angles.min(axis=1)


def locate_points(mesh: TriMesh, points: np.ndarray, chunk: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Containing element and barycentric coordinates for each point; element
    index -1 when a point lies outside the mesh."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    corners = mesh.element_points()
    x0 = corners[:, 0]
    d1 = corners[:, 1] - x0
    d2 = corners[:, 2] - x0
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]

    found = np.full(pts.shape[0], -1, dtype=np.int64)
    bary = np.zeros((pts.shape[0], 3))
    for lo in range(0, pts.shape[0], chunk):
        block = pts[lo : lo + chunk]
        rel = block[:, None, :] - x0[None, :, :]
        l1 = (rel[..., 0] * d2[None, :, 1] - rel[..., 1] * d2[None, :, 0]) / det[None, :]
        l2 = (d1[None, :, 0] * rel[..., 1] - d1[None, :, 1] * rel[..., 0]) / det[None, :]
        l0 = 1.0 - l1 - l2
        inside = (l0 >= -1e-12) & (l1 >= -1e-12) & (l2 >= -1e-12)
        hit = inside.any(axis=1)
        idx = np.argmax(inside, axis=1)
        rows = np.arange(block.shape[0])
        found[lo : lo + chunk] = np.where(hit, idx, -1)
        bary[lo : lo + chunk] = np.stack((l0[rows, idx], l1[rows, idx], l2[rows, idx]), 1)
    return found, bary


def dump_mesh(mesh: TriMesh, path: Path) -> Path:
    """Plain-text mesh: header, node coordinates, element triples (newest
    vertex first), boundary polyline indices."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    local = _normalized_elements(mesh)
    lines = [f"nodes {mesh.n_nodes} elements {mesh.n_elements} boundary {mesh.boundary.size}"]
    lines.extend(f"{x!r} {y!r}" for x, y in mesh.nodes.tolist())
    lines.extend(f"{a} {b} {c}" for a, b, c in local.tolist())
    lines.extend(str(i) for i in mesh.boundary.tolist())
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_mesh(path: Path, level: Optional[int] = None) -> TriMesh:
    raw = Path(path).read_text(encoding="utf-8").splitlines()
    header = raw[0].split()
    if header[0::2] != ["nodes", "elements", "boundary"]:
        raise ValueError(f"Not a mesh file: {path}")
    n_nodes, n_elements, n_boundary = (int(v) for v in header[1::2])
    body = raw[1:]
    nodes = np.array([[float(v) for v in line.split()] for line in body[:n_nodes]], dtype=float)
    elements = np.array(
        [[int(v) for v in line.split()] for line in body[n_nodes : n_nodes + n_elements]],
        dtype=np.int64,
    ).reshape(-1, 3)
    boundary = np.array(
        [int(line) for line in body[n_nodes + n_elements : n_nodes + n_elements + n_boundary]],
        dtype=np.int64,
    )
    return TriMesh(
        nodes=nodes.reshape(-1, 2),
        elements=elements,
        refinement_edge=np.zeros(n_elements, dtype=np.int8),
        boundary=boundary,
        level=level or 0,
    )


def _normalized_elements(mesh: TriMesh) -> np.ndarray:
    """Roll each element so that its refinement edge is opposite vertex 0."""
    shift = mesh.refinement_edge.astype(np.int64)
    cols = (np.arange(3)[None, :] + shift[:, None]) % 3
    return np.take_along_axis(mesh.elements, cols, axis=1)


def _seed_refinement_edges(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    """Longest edge of each element, ties broken by the lowest node indices."""
    seeds = np.zeros(elements.shape[0], dtype=np.int8)
    for k, element in enumerate(elements):
        candidates = []
        for i in range(3):
            a, b = element[(i + 1) % 3], element[(i + 2) % 3]
            length = float(np.linalg.norm(nodes[a] - nodes[b]))
            candidates.append((-round(length, 12), min(a, b), max(a, b), i))
        seeds[k] = min(candidates)[3]
    return seeds
