"""H^2 compression of a symmetric matrix with nested orthogonal cluster bases."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clustering import BlockPartition, Cluster, ClusterTree
from .hmatrix import BYTES_PER_VALUE, HMatrix
from .lowrank import LowRankFactor


def far_partners(partition: BlockPartition) -> dict[int, list[Cluster]]:
    """Column clusters of the far blocks in each block row, keyed by row cluster id."""
    out: dict[int, list[Cluster]] = {}
    for b in partition.far:
        out.setdefault(b.row.id, []).append(b.col)
    return out


def total_cluster_columns(tree: ClusterTree, partition: BlockPartition, tau: Cluster,
                          partners: dict | None = None) -> np.ndarray:
    """Cluster-ordered column indices of M_tau: far partners of tau and of all its ancestors."""
    partners = far_partners(partition) if partners is None else partners
    cols = [s for p in tree.predecessors(tau) for s in partners.get(p.id, [])]
    cols.sort(key=lambda s: s.start)
    if not cols:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate([np.arange(s.start, s.stop) for s in cols])


def total_cluster_rows(W, tree: ClusterTree, partition: BlockPartition, tau: Cluster) -> np.ndarray:
    """W restricted to tau x M_tau (W in cluster ordering)."""
    return np.asarray(W)[tau.slice][:, total_cluster_columns(tree, partition, tau)]


@dataclass(eq=False)
class ClusterBasis:
    """Nested basis: explicit U at leaves, transfer T_c (k_c x k_parent) for every non-root c.

    The expanded basis of a non-leaf cluster is stacked from its sons,
    ``U_t = [U_t1 T_t1; U_t2 T_t2]``.
    """

    tree: ClusterTree
    ranks: dict[int, int]
    leaf_bases: dict[int, np.ndarray]
    transfers: dict[int, np.ndarray]
    requested_rank: int
    truncated: set[int] = field(default_factory=set)   # ids with k < requested rank

    def rank(self, c: Cluster) -> int:
        return self.ranks[c.id]

    def explicit(self, c: Cluster) -> np.ndarray:
        if c.is_leaf:
            return self.leaf_bases[c.id]
        return np.vstack([self.explicit(s) @ self.transfers[s.id] for s in c.sons])

    def explicit_all(self) -> dict[int, np.ndarray]:
        out: dict[int, np.ndarray] = {}
        for c in reversed(self.tree.nodes):   # sons before parents
            out[c.id] = self.leaf_bases[c.id] if c.is_leaf else np.vstack(
                [out[s.id] @ self.transfers[s.id] for s in c.sons])
        return out

    def nvalues(self) -> int:
        return sum(U.size for U in self.leaf_bases.values()) + sum(T.size for T in self.transfers.values())


def _leading(A: np.ndarray, r: int) -> np.ndarray:
    if min(A.shape) == 0:
        return np.zeros((A.shape[0], 0))
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    # drop exactly null directions so the basis stays orthonormal and meaningful
    k = min(r, int(np.count_nonzero(s > s[0] * 1e-15)) if s[0] > 0 else 0)
    return U[:, :k]


def build_nested_basis(W, tree: ClusterTree, partition: BlockPartition, r: int) -> ClusterBasis:
    """Bottom-up orthonormal bases for the total cluster rows of W.

    Instead of W|tau x M_tau itself, an internal cluster compresses the
    sons' projections ``U_son^T W|son x M_tau``, which is what keeps the
    basis nested.
    """
    if r < 1:
        raise ValueError("rank must be >= 1")
    W = np.asarray(W, dtype=float)
    partners = far_partners(partition)
    cols = {c.id: total_cluster_columns(tree, partition, c, partners) for c in tree.nodes}
    ranks, leaf_bases, transfers, truncated = {}, {}, {}, set()
    proj: dict[int, np.ndarray] = {}   # U_c^T W|c x M_c
    for c in reversed(tree.nodes):
        M = cols[c.id]
        if c.is_leaf:
            U = _leading(W[c.slice][:, M], r)
            leaf_bases[c.id] = U
            proj[c.id] = U.T @ W[c.slice][:, M]
        else:
            # M_c is a subset of every son's M; pick its positions in the sons' projections
            stacked = []
            for s in c.sons:
                pos = np.searchsorted(cols[s.id], M)
                stacked.append(proj[s.id][:, pos])
            A = np.vstack(stacked)
            Q = _leading(A, r)
            off = 0
            for s in c.sons:
                k = ranks[s.id]
                transfers[s.id] = Q[off:off + k]
                off += k
            U = Q
            proj[c.id] = Q.T @ A
        ranks[c.id] = U.shape[1]
        if U.shape[1] < r:
            truncated.add(c.id)
        for s in c.sons:
            del proj[s.id]
    return ClusterBasis(tree, ranks, leaf_bases, transfers, r, truncated)


def nestedness_residual(basis: ClusterBasis) -> float:
    """max |U_t|son - U_son U_son^T U_t|son| over all sons, from the expanded bases.

    Zero iff every son basis spans the restriction of its parent's basis.
    """
    explicit = basis.explicit_all()
    worst = 0.0
    for c in basis.tree.nodes:
        for s in c.sons:
            part = explicit[c.id][s.start - c.start:s.stop - c.start]
            Us = explicit[s.id]
            diff = part - Us @ (Us.T @ part)
            if diff.size:
                worst = max(worst, float(np.abs(diff).max()))
    return worst


def orthogonality_residual(basis: ClusterBasis) -> float:
    worst = 0.0
    for cid, U in basis.explicit_all().items():
        if U.shape[1]:
            worst = max(worst, float(np.abs(U.T @ U - np.eye(U.shape[1])).max()))
    return worst


@dataclass
class OpCounter:
    multiply_adds: int = 0


@dataclass(eq=False)
class H2Matrix:
    """Far blocks U_t M_ts U_s^T, near blocks dense; vectors in mesh ordering."""

    partition: BlockPartition
    row_basis: ClusterBasis
    col_basis: ClusterBasis
    couplings: list          # per block: (k_t, k_s) ndarray for far, None for near
    near: list               # per block: ndarray for near, None for far

    @property
    def n(self) -> int:
        return self.partition.n

    def to_dense(self, permuted: bool = False) -> np.ndarray:
        Ur, Uc = self.row_basis.explicit_all(), self.col_basis.explicit_all()
        A = np.zeros((self.n, self.n))
        for b, M, D in zip(self.partition.blocks, self.couplings, self.near):
            A[b.row.slice, b.col.slice] = D if M is None else Ur[b.row.id] @ M @ Uc[b.col.id].T
        if permuted:
            return A
        p = self.partition.tree.perm
        out = np.empty_like(A)
        out[np.ix_(p, p)] = A
        return out

    def matvec(self, x, counter: OpCounter | None = None):
        return h2_matvec(self, x, counter)

    def rmatvec(self, x, counter: OpCounter | None = None):
        return h2_matvec(self, x, counter, transpose=True)

    def nvalues(self) -> int:
        v = self.row_basis.nvalues()
        if self.col_basis is not self.row_basis:
            v += self.col_basis.nvalues()
        v += sum(M.size for M in self.couplings if M is not None)
        v += sum(D.size for D in self.near if D is not None)
        return v


def h2_compress(W, row_basis: ClusterBasis, col_basis: ClusterBasis, partition: BlockPartition) -> H2Matrix:
    """M_ts = U_t^T W|t x s U_s on far blocks; near blocks copied.  W in cluster ordering."""
    W = np.asarray(W, dtype=float)
    Ur = row_basis.explicit_all()
    Uc = Ur if col_basis is row_basis else col_basis.explicit_all()
    couplings, near = [], []
    for b in partition.blocks:
        blk = W[b.row.slice, b.col.slice]
        if b.admissible:
            couplings.append(Ur[b.row.id].T @ blk @ Uc[b.col.id])
            near.append(None)
        else:
            couplings.append(None)
            near.append(blk.copy())
    return H2Matrix(partition, row_basis, col_basis, couplings, near)


def h2_matvec(H: H2Matrix, x, counter: OpCounter | None = None, transpose: bool = False):
    """Upward transform, coupling, downward transform and near field."""
    tree = H.partition.tree
    perm = tree.perm
    ops = 0
    xp = np.asarray(x, dtype=float)[perm]
    src, dst = (H.col_basis, H.row_basis) if not transpose else (H.row_basis, H.col_basis)

    xhat: dict[int, np.ndarray] = {}
    for c in reversed(tree.nodes):
        if c.is_leaf:
            U = src.leaf_bases[c.id]
            xhat[c.id] = U.T @ xp[c.slice]
            ops += U.size
        else:
            acc = np.zeros(src.ranks[c.id])
            for s in c.sons:
                T = src.transfers[s.id]
                acc += T.T @ xhat[s.id]
                ops += T.size
            xhat[c.id] = acc

    yhat = {c.id: np.zeros(dst.ranks[c.id]) for c in tree.nodes}
    y = np.zeros_like(xp)
    for b, M, D in zip(H.partition.blocks, H.couplings, H.near):
        r, s = (b.row, b.col) if not transpose else (b.col, b.row)
        if M is None:
            y[r.slice] += (D.T if transpose else D) @ xp[s.slice]
            ops += D.size
        else:
            yhat[r.id] += (M.T if transpose else M) @ xhat[s.id]
            ops += M.size

    for c in tree.nodes:   # parents before sons
        if c.is_leaf:
            U = dst.leaf_bases[c.id]
            y[c.slice] += U @ yhat[c.id]
            ops += U.size
        else:
            for s in c.sons:
                T = dst.transfers[s.id]
                yhat[s.id] += T @ yhat[c.id]
                ops += T.size

    if counter is not None:
        counter.multiply_adds += ops
    out = np.empty_like(y)
    out[perm] = y
    return out


def hmatrix_matvec_ops(H: HMatrix) -> int:
    """Multiply-adds of one plain H-matvec."""
    return sum(p.nvalues if isinstance(p, LowRankFactor) else p.size for p in H.payloads)


def h2_storage_report(H: H2Matrix) -> dict:
    """Leaf bases, transfers, couplings and near blocks at 8 bytes per value."""
    vals = H.nvalues()
    return {"bytes": BYTES_PER_VALUE * vals, "compression_percent": 100.0 * vals / H.n**2}
