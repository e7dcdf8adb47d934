"""Blockwise low-rank (H-) matrices built by compressing dense matrices or the kernel."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import assemble_block
from .clustering import BlockPartition, sparsity_constant, tree_depth
from .linalg import dense_inverse, spectral_norm  # noqa: F401  (re-exported)
from .lowrank import LowRankFactor, far_block_from_kernel, truncated_svd
from .mesh import BoundaryMesh

BYTES_PER_VALUE = 8


@dataclass(eq=False)
class HMatrix:
    """One payload per partition block: ndarray (near) or LowRankFactor (far).

    Indices of the payloads refer to the cluster ordering; ``matvec`` takes
    and returns vectors in the original (mesh) ordering.
    """

    partition: BlockPartition
    payloads: list
    rank: int | None = None
    block_errors: list[float] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.partition.n

    @property
    def perm(self) -> np.ndarray:
        return self.partition.tree.perm

    def _apply(self, x, transpose=False):
        x = np.asarray(x, dtype=float)
        xp = x[self.perm]
        y = np.zeros_like(xp)
        for blk, pay in zip(self.partition.blocks, self.payloads):
            r, c = (blk.col.slice, blk.row.slice) if transpose else (blk.row.slice, blk.col.slice)
            if isinstance(pay, LowRankFactor):
                if pay.rank:
                    y[r] += pay.rmatvec(xp[c]) if transpose else pay.matvec(xp[c])
            else:
                y[r] += (pay.T if transpose else pay) @ xp[c]
        out = np.empty_like(y)
        out[self.perm] = y
        return out

    def matvec(self, x):
        return self._apply(x)

    def rmatvec(self, x):
        return self._apply(x, transpose=True)

    __matmul__ = matvec

    def to_dense(self, permuted: bool = False) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for blk, pay in zip(self.partition.blocks, self.payloads):
            A[blk.row.slice, blk.col.slice] = pay.to_dense() if isinstance(pay, LowRankFactor) else pay
        if permuted:
            return A
        out = np.empty_like(A)
        out[np.ix_(self.perm, self.perm)] = A
        return out

    def nvalues(self) -> int:
        return sum(p.nvalues if isinstance(p, LowRankFactor) else p.size for p in self.payloads)


def permute(A, partition: BlockPartition) -> np.ndarray:
    """A in cluster ordering."""
    p = partition.tree.perm
    return np.asarray(A)[np.ix_(p, p)]


def compress_dense(A, partition: BlockPartition, r: int | None, *, permuted: bool = False) -> HMatrix:
    """Truncated SVD of every admissible block, exact copies elsewhere.

    ``r=None`` keeps full rank.  With ``permuted=True`` A is already in cluster order.
    """
    Ap = np.asarray(A, dtype=float) if permuted else permute(A, partition)
    payloads, errors = [], []
    for blk in partition.blocks:
        sub = Ap[blk.row.slice, blk.col.slice]
        if blk.admissible:
            f = truncated_svd(sub, r)
            payloads.append(f)
            errors.append(f.truncation_error)
        else:
            payloads.append(sub.copy())
            errors.append(0.0)
    return HMatrix(partition, payloads, r, errors)


def compress_forward(mesh: BoundaryMesh, partition: BlockPartition, k: int) -> HMatrix:
    """H-matrix of V: Chebyshev factors on far blocks, assembled near blocks."""
    tree = partition.tree
    payloads = []
    for blk in partition.blocks:
        if blk.admissible:
            payloads.append(far_block_from_kernel(mesh, tree, blk.row, blk.col, k, partition.eta))
        else:
            payloads.append(assemble_block(mesh, tree.perm[blk.row.slice], tree.perm[blk.col.slice]))
    return HMatrix(partition, payloads, (k + 1) ** mesh.dim)


def partition_storage(partition: BlockPartition, r: int) -> dict:
    """Storage of a rank-r H-matrix on ``partition`` without building it."""
    vals = 0
    for b in partition.blocks:
        m, n = b.shape
        vals += min(r, m, n) * (m + n) if b.admissible else m * n
    nbytes = BYTES_PER_VALUE * vals
    return {"bytes": nbytes, "compression_percent": 100.0 * vals / partition.n**2}


def storage_report(H: HMatrix) -> dict:
    """bytes = 8 * (sum_near |t||s| + sum_far rank * (|t| + |s|)) and percent of 8 N^2."""
    vals = H.nvalues()
    return {"bytes": BYTES_PER_VALUE * vals, "compression_percent": 100.0 * vals / H.n**2}


ROUNDOFF_FLOOR = 1e-12


def inverse_error(V, W_H: HMatrix, tol: float = 1e-6, seed: int = 12345) -> float:
    """||I - V W_H||_2 by power iteration (V dense, original ordering).

    Values below 1e-12 are roundoff and are only resolved to within that floor.
    """
    V = np.asarray(V)
    return spectral_norm(
        lambda x: x - V @ W_H.matvec(x),
        lambda x: x - W_H.rmatvec(V.T @ x),
        W_H.n, tol=tol, seed=seed, atol=ROUNDOFF_FLOOR,
    )


def difference_norm(A, H: HMatrix, tol: float = 1e-6, seed: int = 12345) -> float:
    """||A - H||_2 by power iteration."""
    A = np.asarray(A)
    return spectral_norm(lambda x: A @ x - H.matvec(x), lambda x: A.T @ x - H.rmatvec(x),
                         H.n, tol=tol, seed=seed)


def aggregate_error_bound(block_errors, partition: BlockPartition, c_sp: int | None = None) -> float:
    """C_sp * sum over levels of the largest block error whose row cluster sits on that level."""
    if c_sp is None:
        c_sp = sparsity_constant(partition)
    per_level = np.zeros(tree_depth(partition.tree) + 1)
    for blk, e in zip(partition.blocks, block_errors):
        per_level[blk.row.level] = max(per_level[blk.row.level], e)
    return float(c_sp * per_level.sum())
