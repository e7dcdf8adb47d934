"""Geometric cluster trees, eta-admissibility and block partitions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import BoundaryMesh


@dataclass(eq=False)
class Cluster:
    """Node of a cluster tree; owns indices ``perm[start:stop]``.

    ``center``/``side`` describe the axis-parallel hypercube containing the
    closures of all elements of the cluster.
    """

    start: int
    stop: int
    level: int
    center: np.ndarray
    side: float
    sons: list["Cluster"] = field(default_factory=list)
    parent: "Cluster | None" = field(default=None, repr=False)
    id: int = -1

    @property
    def size(self) -> int:
        return self.stop - self.start

    @property
    def is_leaf(self) -> bool:
        return not self.sons

    @property
    def slice(self) -> slice:
        return slice(self.start, self.stop)

    @property
    def diam(self) -> float:
        return self.side * math.sqrt(len(self.center))

    def __repr__(self):
        return f"Cluster(id={self.id}, [{self.start}:{self.stop}], level={self.level})"


@dataclass(eq=False)
class ClusterTree:
    root: Cluster
    perm: np.ndarray          # perm[new] = old element index
    n_leaf: int
    nodes: list[Cluster]      # preorder; nodes[c.id] is c

    @property
    def n(self) -> int:
        return self.root.size

    @property
    def iperm(self) -> np.ndarray:
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(len(self.perm))
        return inv

    @property
    def depth(self) -> int:
        return tree_depth(self)

    def leaves(self) -> list[Cluster]:
        return [c for c in self.nodes if c.is_leaf]

    def predecessors(self, c: Cluster) -> list[Cluster]:
        out = []
        while c is not None:
            out.append(c)
            c = c.parent
        return out


def _cube(lo: np.ndarray, hi: np.ndarray):
    return 0.5 * (lo + hi), float(np.max(hi - lo))


def _split(points: np.ndarray, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = points[idx]
    lo, hi = p.min(axis=0), p.max(axis=0)
    ext = hi - lo
    # longest axis first, ties to the lowest axis index
    for axis in sorted(range(points.shape[1]), key=lambda a: (-ext[a], a)):
        if ext[axis] <= 0:
            break
        mid = 0.5 * (lo[axis] + hi[axis])
        left = p[:, axis] <= mid
        if 0 < left.sum() < len(idx):
            return idx[left], idx[~left]
    order = np.argsort(p[:, int(np.argmax(ext))], kind="stable")
    half = len(idx) // 2
    return idx[np.sort(order[:half])], idx[np.sort(order[half:])]


def build_cluster_tree_from_points(points, n_leaf: int, lo=None, hi=None) -> ClusterTree:
    """Geometric bisection of ``points``; ``lo``/``hi`` are per-index extents for the boxes."""
    if n_leaf < 1:
        raise ValueError("n_leaf must be >= 1")
    points = np.asarray(points, dtype=float)
    lo = points if lo is None else np.asarray(lo, dtype=float)
    hi = points if hi is None else np.asarray(hi, dtype=float)
    perm = np.empty(len(points), dtype=np.int64)
    nodes: list[Cluster] = []

    def build(idx, start, level, parent):
        center, side = _cube(lo[idx].min(axis=0), hi[idx].max(axis=0))
        c = Cluster(start, start + len(idx), level, center, side, parent=parent, id=len(nodes))
        nodes.append(c)
        if len(idx) <= n_leaf:
            perm[start:start + len(idx)] = idx
            return c
        a, b = _split(points, idx)
        c.sons = [build(a, start, level + 1, c), build(b, start + len(a), level + 1, c)]
        return c

    root = build(np.arange(len(points)), 0, 0, None)
    return ClusterTree(root, perm, n_leaf, nodes)


def build_cluster_tree(mesh: BoundaryMesh, n_leaf: int = 25) -> ClusterTree:
    """Split element centroids; bounding cubes enclose the element closures."""
    return build_cluster_tree_from_points(mesh.centroids, n_leaf, mesh.element_lo, mesh.element_hi)


def tree_depth(tree: ClusterTree) -> int:
    return max(c.level for c in tree.nodes)


def box_distance(ca, sa, cb, sb) -> float:
    gap = np.maximum(np.abs(np.asarray(ca) - np.asarray(cb)) - 0.5 * (sa + sb), 0.0)
    return float(np.linalg.norm(gap))


def is_admissible(box_a, box_b, eta: float) -> bool:
    """min(diam A, diam B) <= eta * dist(A, B) for hypercubes given as (center, side)."""
    (ca, sa), (cb, sb) = box_a, box_b
    dim = len(np.atleast_1d(ca))
    dist = box_distance(ca, sa, cb, sb)
    if dist <= 0:
        return False
    return min(sa, sb) * math.sqrt(dim) <= eta * dist


def clusters_admissible(t: Cluster, s: Cluster, eta: float) -> bool:
    return is_admissible((t.center, t.side), (s.center, s.side), eta)


@dataclass(frozen=True, eq=False)
class Block:
    row: Cluster
    col: Cluster
    admissible: bool

    @property
    def shape(self) -> tuple[int, int]:
        return self.row.size, self.col.size


@dataclass(eq=False)
class BlockPartition:
    tree: ClusterTree
    blocks: list[Block]
    eta: float

    @property
    def far(self) -> list[Block]:
        return [b for b in self.blocks if b.admissible]

    @property
    def near(self) -> list[Block]:
        return [b for b in self.blocks if not b.admissible]

    @property
    def n(self) -> int:
        return self.tree.n

    def coverage_mask(self) -> np.ndarray:
        """Count of blocks covering each (i, j); a valid partition gives all ones."""
        m = np.zeros((self.n, self.n), dtype=np.int32)
        for b in self.blocks:
            m[b.row.slice, b.col.slice] += 1
        return m


def build_block_partition(tree: ClusterTree, eta: float = 2.0) -> BlockPartition:
    blocks: list[Block] = []
    stack = [(tree.root, tree.root)]
    while stack:
        t, s = stack.pop()
        if clusters_admissible(t, s, eta):
            blocks.append(Block(t, s, True))
        elif t.is_leaf and s.is_leaf:
            blocks.append(Block(t, s, False))
        else:
            ts = t.sons or [t]
            ss = s.sons or [s]
            stack.extend((a, b) for a in reversed(ts) for b in reversed(ss))
    blocks.sort(key=lambda b: (b.row.start, b.col.start))
    return BlockPartition(tree, blocks, eta)


def sparsity_constant(partition: BlockPartition) -> int:
    rows: dict[int, int] = {}
    cols: dict[int, int] = {}
    for b in partition.far:
        rows[b.row.id] = rows.get(b.row.id, 0) + 1
        cols[b.col.id] = cols.get(b.col.id, 0) + 1
    return max([0, *rows.values(), *cols.values()])


def cluster_stats(partition: BlockPartition) -> dict:
    tree = partition.tree
    return {
        "N": tree.n,
        "n_leaf": tree.n_leaf,
        "eta": partition.eta,
        "depth": tree_depth(tree),
        "C_sp": sparsity_constant(partition),
        "n_far": len(partition.far),
        "n_near": len(partition.near),
    }
