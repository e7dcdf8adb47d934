"""Quasiuniform boundary meshes of polygons (2D) and polyhedra (3D)."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Raised for malformed mesh files or topologically invalid meshes."""


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """Segments (dim=2) or triangles (dim=3) of a closed boundary.

    ``vertices`` is (n_vertices, dim), ``elements`` is (N, dim) of zero-based
    vertex indices. Construction validates the topology.
    """

    vertices: np.ndarray
    elements: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        e = np.ascontiguousarray(self.elements, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] not in (2, 3):
            raise MeshError("vertices must be an (n, 2) or (n, 3) array")
        if e.size == 0:
            raise MeshError("empty mesh")
        if e.ndim != 2 or e.shape[1] != v.shape[1]:
            raise MeshError(f"elements must have {v.shape[1]} vertex indices each")
        if e.min() < 0 or e.max() >= len(v):
            raise MeshError("invalid element index")
        v.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "elements", e)
        object.__setattr__(self, "dim", v.shape[1])
        if np.any(self.measures <= 0):
            raise MeshError("degenerate element with non-positive measure")
        _check_closed(self)

    def __len__(self):
        return len(self.elements)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @cached_property
    def corners(self) -> np.ndarray:
        """(N, dim, dim) element corner coordinates."""
        return self.vertices[self.elements]

    @cached_property
    def measures(self) -> np.ndarray:
        c = self.corners
        if self.dim == 2:
            return np.linalg.norm(c[:, 1] - c[:, 0], axis=1)
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.corners.mean(axis=1)

    @cached_property
    def diameters(self) -> np.ndarray:
        c = self.corners
        if self.dim == 2:
            return self.measures.copy()
        d = [np.linalg.norm(c[:, i] - c[:, j], axis=1) for i, j in ((0, 1), (1, 2), (2, 0))]
        return np.max(d, axis=0)

    @cached_property
    def element_lo(self) -> np.ndarray:
        return self.corners.min(axis=1)

    @cached_property
    def element_hi(self) -> np.ndarray:
        return self.corners.max(axis=1)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    def diameter(self) -> float:
        """Diameter of the vertex set (brute force, fine for desk-scale meshes)."""
        v = self.vertices
        best = 0.0
        for start in range(0, len(v), 512):
            d = np.linalg.norm(v[start:start + 512, None, :] - v[None, :, :], axis=-1)
            best = max(best, float(d.max()))
        return best


def _check_closed(mesh: BoundaryMesh) -> None:
    e = mesh.elements
    if mesh.dim == 2:
        deg = np.bincount(e.ravel(), minlength=len(mesh.vertices))
        used = deg > 0
        if np.any(deg[used] != 2):
            raise MeshError("boundary curve is not closed: vertex degree != 2")
        return
    edges = Counter()
    for a, b, c in e:
        for p, q in ((a, b), (b, c), (c, a)):
            edges[(min(p, q), max(p, q))] += 1
    bad = [k for k, n in edges.items() if n != 2]
    if bad:
        raise MeshError(f"surface is not closed: edge {bad[0]} in {edges[bad[0]]} triangles")


def generate_lshape_boundary(refinement: int, scale: float = 0.5) -> BoundaryMesh:
    """Uniform mesh of the L-shaped boundary, 8*refinement segments.

    The domain is (0,1)x(0,1/2) U (0,1/2)x[1/2,1) times ``scale``; elements
    are numbered walking the boundary counterclockwise from the origin.
    """
    if refinement < 1:
        raise ValueError("refinement must be >= 1")
    if scale <= 0:
        raise ValueError("scale must be positive")
    corners = np.array([(0, 0), (1, 0), (1, 0.5), (0.5, 0.5), (0.5, 1), (0, 1)], dtype=float)
    pts = []
    for i in range(6):
        a, b = corners[i], corners[(i + 1) % 6]
        n = int(round(np.linalg.norm(b - a) * 2 * refinement))
        t = np.arange(n)[:, None] / n
        pts.append(a + t * (b - a))
    vertices = scale * np.concatenate(pts)
    n = len(vertices)
    elements = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
    return BoundaryMesh(vertices, elements)


def generate_cube_surface(m: int, scale: float = 1.0) -> BoundaryMesh:
    """Surface of [0, scale]^3 with 12*m^2 outward-oriented triangles (face-major order)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if scale <= 0:
        raise ValueError("scale must be positive")
    index: dict[tuple[int, int, int], int] = {}
    verts: list[tuple[int, int, int]] = []

    def vid(p):
        key = tuple(int(c) for c in p)
        if key not in index:
            index[key] = len(verts)
            verts.append(key)
        return index[key]

    elements = []
    # (normal axis, side, in-plane axes u, v) with u x v pointing outward
    faces = [(0, 0, 2, 1), (0, m, 1, 2), (1, 0, 0, 2), (1, m, 2, 0), (2, 0, 1, 0), (2, m, 0, 1)]
    for axis, side, u, v in faces:
        for i in range(m):
            for j in range(m):
                quad = []
                for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
                    p = [0, 0, 0]
                    p[axis], p[u], p[v] = side, i + di, j + dj
                    quad.append(vid(p))
                a, b, c, d = quad
                elements.append((a, b, c))
                elements.append((a, c, d))
    vertices = np.array(verts, dtype=float) * (scale / m)
    return BoundaryMesh(vertices, np.array(elements))


def mesh_stats(mesh: BoundaryMesh) -> dict:
    """N, h_min, h_max, quasiuniformity ratio and shape-regularity constant gamma.

    gamma is max diam(T)/|T|^(1/2) in 3D and the largest diameter ratio of
    neighbouring elements in 2D.
    """
    d = mesh.diameters
    if mesh.dim == 3:
        gamma = float(np.max(d / np.sqrt(mesh.measures)))
    else:
        owners: dict[int, list[int]] = {}
        for j, (a, b) in enumerate(mesh.elements):
            owners.setdefault(int(a), []).append(j)
            owners.setdefault(int(b), []).append(j)
        gamma = 1.0
        for js in owners.values():
            for p in js:
                for q in js:
                    gamma = max(gamma, d[p] / d[q])
    return {
        "N": mesh.n_elements,
        "h_min": float(d.min()),
        "h_max": float(d.max()),
        "quasiuniformity": float(d.max() / d.min()),
        "gamma": float(gamma),
    }


def save_mesh(mesh: BoundaryMesh, path) -> None:
    lines = [f"{mesh.dim} {len(mesh.vertices)} {mesh.n_elements}"]
    lines += [" ".join(f"{x:.17g}" for x in row) for row in mesh.vertices]
    lines += [" ".join(str(int(i)) for i in row) for row in mesh.elements]
    Path(path).write_text("\n".join(lines) + "\n")


def load_mesh(path) -> BoundaryMesh:
    """Parse the whitespace-separated mesh text format (``#`` starts a comment)."""
    rows = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            rows.append((lineno, body.split()))
    if not rows:
        raise MeshError("line 1: missing header")
    lineno, header = rows[0]
    try:
        dim, nv, ne = (int(t) for t in header)
    except ValueError:
        raise MeshError(f"line {lineno}: header must be 'dim N_vertices N_elements'") from None
    if dim not in (2, 3):
        raise MeshError(f"line {lineno}: dim must be 2 or 3")
    if ne == 0:
        raise MeshError("empty mesh")
    if len(rows) - 1 != nv + ne:
        raise MeshError(f"expected {nv + ne} data lines after header, found {len(rows) - 1}")
    vertices = np.empty((nv, dim))
    elements = np.empty((ne, dim), dtype=np.int64)
    for k, (lineno, toks) in enumerate(rows[1:]):
        if len(toks) != dim:
            raise MeshError(f"line {lineno}: expected {dim} values, got {len(toks)}")
        try:
            if k < nv:
                vertices[k] = [float(t) for t in toks]
            else:
                elements[k - nv] = [int(t) for t in toks]
        except ValueError:
            raise MeshError(f"line {lineno}: cannot parse {' '.join(toks)!r}") from None
        if k >= nv and (elements[k - nv].min() < 0 or elements[k - nv].max() >= nv):
            raise MeshError(f"line {lineno}: invalid element index")
    return BoundaryMesh(vertices, elements)
