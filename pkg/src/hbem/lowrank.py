"""Low-rank factors: truncated SVD and Chebyshev degenerate-kernel expansions."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .assembly import kernel_eval
from .clustering import Cluster, ClusterTree, clusters_admissible
from .mesh import BoundaryMesh
from .quadrature import gauss_legendre, triangle_rule


@dataclass(eq=False)
class LowRankFactor:
    """Block approximation X @ Y.T.

    ``truncation_error`` is the exact spectral error when known (SVD), else None.
    """

    X: np.ndarray
    Y: np.ndarray
    truncation_error: float | None = None

    @property
    def rank(self) -> int:
        return self.X.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape[0], self.Y.shape[0]

    def to_dense(self) -> np.ndarray:
        return self.X @ self.Y.T

    def matvec(self, x):
        return self.X @ (self.Y.T @ x)

    def rmatvec(self, x):
        return self.Y @ (self.X.T @ x)

    @property
    def nvalues(self) -> int:
        return self.X.size + self.Y.size


def truncated_svd(block, r: int | None) -> LowRankFactor:
    """Best rank-r approximation in the spectral norm; r=None keeps every triplet."""
    A = np.asarray(block, dtype=float)
    if r is not None and r < 0:
        raise ValueError("rank must be >= 0")
    if min(A.shape) == 0:
        return LowRankFactor(np.zeros((A.shape[0], 0)), np.zeros((A.shape[1], 0)), 0.0)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    k = len(s) if r is None else min(r, len(s))
    err = float(s[k]) if k < len(s) else 0.0
    return LowRankFactor(U[:, :k] * s[:k], Vt[:k].T.copy(), err)


def singular_value_profile(block) -> np.ndarray:
    A = np.asarray(block, dtype=float)
    if min(A.shape) == 0:
        return np.zeros(0)
    return np.linalg.svd(A, compute_uv=False)


def _cheb_nodes(k: int) -> tuple[np.ndarray, np.ndarray]:
    i = np.arange(k + 1)
    theta = (2 * i + 1) * math.pi / (2 * (k + 1))
    # barycentric weights for first-kind points
    return np.cos(theta), (-1.0) ** i * np.sin(theta)


def _lagrange_1d(t: np.ndarray, nodes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    diff = t[:, None] - nodes[None, :]
    exact = diff == 0
    diff[exact] = 1.0
    q = weights / diff
    L = q / q.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    L[hit] = exact[hit].astype(float)
    return L


@dataclass(eq=False)
class ChebInterpolant:
    """Tensor Chebyshev interpolation of degree k per axis on a hypercube."""

    center: np.ndarray
    side: float
    k: int

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def rank(self) -> int:
        return (self.k + 1) ** self.dim

    @cached_property
    def _ref(self):
        return _cheb_nodes(self.k)

    @cached_property
    def nodes(self) -> np.ndarray:
        """((k+1)^dim, dim) nodes; the last axis varies fastest."""
        t, _ = self._ref
        grid = np.array(list(itertools.product(t, repeat=self.dim)))
        return self.center + 0.5 * self.side * grid

    def basis(self, y) -> np.ndarray:
        """Lagrange polynomials at points y: (P, rank)."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        t, w = self._ref
        ref = (y - self.center) / (0.5 * self.side) if self.side > 0 else np.zeros_like(y)
        out = np.ones((len(y), 1))
        for axis in range(self.dim):
            La = _lagrange_1d(ref[:, axis], t, w)
            out = (out[:, :, None] * La[:, None, :]).reshape(len(y), -1)
        return out

    def __call__(self, values_at_nodes, y) -> np.ndarray:
        return self.basis(y) @ np.asarray(values_at_nodes)


def cheb_interpolant(box, k: int) -> ChebInterpolant:
    """``box`` is (center, side)."""
    if k < 0:
        raise ValueError("degree must be >= 0")
    center, side = box
    return ChebInterpolant(np.asarray(center, dtype=float), float(side), k)


def sample_grid(box, n: int = 20) -> np.ndarray:
    center, side = box
    center = np.asarray(center, dtype=float)
    t = np.linspace(-0.5, 0.5, n) * side
    return center + np.array(list(itertools.product(t, repeat=len(center))))


def degenerate_kernel_error(box_y, x_set, k: int, samples: int = 20) -> float:
    """max |G(x, y) - sum_i G(x, xi_i) L_i(y)| over x in x_set and a grid in box_y."""
    x_set = np.atleast_2d(np.asarray(x_set, dtype=float))
    dim = x_set.shape[1]
    interp = cheb_interpolant(box_y, k)
    ys = sample_grid(box_y, samples)
    Lb = interp.basis(ys)
    G_nodes = kernel_eval(dim, x_set[:, None, :], interp.nodes[None, :, :])
    G_exact = kernel_eval(dim, x_set[:, None, :], ys[None, :, :])
    return float(np.max(np.abs(G_exact - G_nodes @ Lb.T)))


def _element_rule(mesh: BoundaryMesh, elems: np.ndarray, degree: int):
    """Quadrature points (E, Q, dim) and weights (E, Q) on the given elements."""
    c = mesh.corners[elems]
    if mesh.dim == 2:
        s, w = gauss_legendre(max(16, degree // 2 + 1))
        pts = c[:, None, 0] + s[None, :, None] * (c[:, None, 1] - c[:, None, 0])
        return pts, w[None, :] * mesh.measures[elems, None]
    p, w = triangle_rule(max(8, degree // 2 + 1))
    pts = (c[:, None, 0] + p[None, :, 0, None] * (c[:, None, 1] - c[:, None, 0])
           + p[None, :, 1, None] * (c[:, None, 2] - c[:, None, 0]))
    return pts, 2 * w[None, :] * mesh.measures[elems, None]


def _kernel_side(mesh, elems, nodes):
    pts, wts = _element_rule(mesh, elems, 0)
    G = kernel_eval(mesh.dim, pts[:, :, None, :], nodes[None, None, :, :])
    return np.einsum("eqi,eq->ei", G, wts)


def _basis_side(mesh, elems, interp):
    pts, wts = _element_rule(mesh, elems, interp.k * mesh.dim)
    E, Q, d = pts.shape
    L = interp.basis(pts.reshape(-1, d)).reshape(E, Q, -1)
    return np.einsum("eqi,eq->ei", L, wts)


def far_block_from_kernel(mesh: BoundaryMesh, tree: ClusterTree, tau: Cluster, sigma: Cluster,
                          k: int, eta: float = 2.0) -> LowRankFactor:
    """Rank (k+1)^dim factor of V|tau x sigma from Chebyshev interpolation.

    The kernel is interpolated in the variable of the cluster with the
    smaller bounding cube, over that cube.
    """
    if not clusters_admissible(tau, sigma, eta):
        raise ValueError(f"cluster pair ({tau.id}, {sigma.id}) is not {eta}-admissible")
    rows = tree.perm[tau.slice]
    cols = tree.perm[sigma.slice]
    if sigma.side <= tau.side:
        interp = cheb_interpolant((sigma.center, sigma.side), k)
        return LowRankFactor(_kernel_side(mesh, rows, interp.nodes), _basis_side(mesh, cols, interp))
    interp = cheb_interpolant((tau.center, tau.side), k)
    return LowRankFactor(_basis_side(mesh, rows, interp), _kernel_side(mesh, cols, interp.nodes))
