"""Schur complements, recursive Cholesky and the blockwise low-rank Cholesky factor.

All matrices here are in cluster ordering (see ``hmatrix.permute``); the
tree numbers the first son's indices before the second son's.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .clustering import BlockPartition, Cluster, ClusterTree
from .hmatrix import HMatrix
from .linalg import NotSPDError, spectral_norm
from .linalg import dense_cholesky as _potrf
from .lowrank import LowRankFactor, singular_value_profile, truncated_svd


@dataclass(eq=False)
class CholeskyFactor:
    """Lower-triangular C with C C^T = V; ``perm`` is the cluster ordering V was taken in, if any."""

    C: np.ndarray
    perm: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.C)

    def __array__(self, dtype=None, copy=None):
        return self.C if dtype is None else self.C.astype(dtype)


def _mat(C) -> np.ndarray:
    return C.C if isinstance(C, CholeskyFactor) else np.asarray(C)


def dense_cholesky(V, perm: np.ndarray | None = None) -> CholeskyFactor:
    """LAPACK Cholesky; raises NotSPDError("not SPD at index i") on a non-positive pivot."""
    return CholeskyFactor(_potrf(V), perm)


@dataclass(eq=False)
class SchurBlock:
    row: slice
    col: slice
    rho: slice
    S: np.ndarray


def _as_slice(c) -> slice:
    return c.slice if isinstance(c, Cluster) else c


def schur_complement(V, tau, sigma, chol: np.ndarray | None = None) -> SchurBlock:
    """S = V|tau x sigma - V|tau x rho (V|rho x rho)^{-1} V|rho x sigma, rho = {i < min(tau u sigma)}.

    ``tau``/``sigma`` are clusters or contiguous slices.  ``chol`` may supply
    a Cholesky factor whose leading block is reused for the rho-solve.
    """
    V = np.asarray(V)
    t, s = _as_slice(tau), _as_slice(sigma)
    m = min(t.start, s.start)
    block = V[t, s]
    rho = slice(0, m)
    if m == 0:
        return SchurBlock(t, s, rho, block.copy())
    try:
        L = _mat(chol)[:m, :m] if chol is not None else _potrf(V[:m, :m])
    except NotSPDError as exc:
        raise np.linalg.LinAlgError(f"singular rho-block: {exc}") from None
    Xt = solve_triangular(L, V[rho, t], lower=True)
    Xs = Xt if s == t else solve_triangular(L, V[rho, s], lower=True)
    return SchurBlock(t, s, rho, block - Xt.T @ Xs)


def schur_rank_profile(S) -> np.ndarray:
    return singular_value_profile(S.S if isinstance(S, SchurBlock) else S)


def hierarchical_schur_residual(V, tau: Cluster, chol: np.ndarray | None = None) -> float:
    """Relative max-norm mismatch between S(tau,tau) and its assembly from the sons' complements."""
    t1, t2 = tau.sons
    S = schur_complement(V, tau, tau, chol).S
    S11 = schur_complement(V, t1, t1, chol).S
    S12 = schur_complement(V, t1, t2, chol).S
    S21 = schur_complement(V, t2, t1, chol).S
    S22 = schur_complement(V, t2, t2, chol).S
    assembled = np.block([[S11, S12], [S21, S22 + S21 @ np.linalg.solve(S11, S12)]])
    return float(np.abs(S - assembled).max() / np.abs(S).max())


def recursive_cholesky(V, tree: ClusterTree) -> CholeskyFactor:
    """C(root) from C(t) = [[C(t1), 0], [S(t2,t1) C(t1)^{-T}, C(t2)]] with leaf Cholesky."""
    V = np.asarray(V, dtype=float)
    C = np.zeros_like(V)

    def rec(node: Cluster, S: np.ndarray):
        # S is the Schur complement S(node, node)
        if node.is_leaf:
            C[node.slice, node.slice] = _potrf(S)
            return
        t1, t2 = node.sons
        n1 = t1.size
        rec(t1, S[:n1, :n1])
        C1 = C[t1.slice, t1.slice]
        L21 = solve_triangular(C1, S[n1:, :n1].T, lower=True).T
        C[t2.slice, t1.slice] = L21
        rec(t2, S[n1:, n1:] - L21 @ L21.T)

    rec(tree.root, V)
    return CholeskyFactor(C, tree.perm)


def inverse_factor_norm_profile(tree: ClusterTree, C) -> dict[int, float]:
    """||C(t)^{-1}||_2 per cluster id, C(t) being the diagonal block of C on t."""
    C = _mat(C)
    out = {}
    for node in tree.nodes:
        s = np.linalg.svd(C[node.slice, node.slice], compute_uv=False)
        out[node.id] = float(1.0 / s[-1])
    return out


def h_cholesky(V, partition: BlockPartition, r: int | None, chol: np.ndarray | None = None) -> HMatrix:
    """Block lower triangular H-matrix C_H: rank-r truncation of the exact factor's admissible blocks."""
    C = _potrf(V) if chol is None else _mat(chol)
    payloads, errors = [], []
    for blk in partition.blocks:
        sub = C[blk.row.slice, blk.col.slice]
        if blk.admissible:
            if blk.row.start > blk.col.start:
                f = truncated_svd(sub, r)
            else:
                m, n = sub.shape
                f = LowRankFactor(np.zeros((m, 0)), np.zeros((n, 0)), 0.0)
            payloads.append(f)
            errors.append(f.truncation_error)
        else:
            payloads.append(sub.copy())
            errors.append(0.0)
    return HMatrix(partition, payloads, r, errors)


def cholesky_errors(V, C, C_H: HMatrix, tol: float = 1e-6, seed: int = 12345) -> dict:
    """Relative spectral errors of the factor and of the product C_H C_H^T.

    V and C are in cluster ordering, like the payloads of C_H.
    """
    V, C = np.asarray(V), _mat(C)
    n = len(C)
    perm = C_H.perm

    def ch(x):  # C_H in cluster ordering
        y = np.empty_like(x)
        y[perm] = x
        return C_H.matvec(y)[perm]

    def cht(x):
        y = np.empty_like(x)
        y[perm] = x
        return C_H.rmatvec(y)[perm]

    nC = spectral_norm(lambda x: C @ x, lambda x: C.T @ x, n, tol=tol, seed=seed)
    nV = spectral_norm(lambda x: V @ x, None, n, tol=tol, seed=seed)
    # differences at roundoff level are resolved only down to 1e-14 relative
    dC = spectral_norm(lambda x: C @ x - ch(x), lambda x: C.T @ x - cht(x), n, tol=tol, seed=seed,
                       atol=1e-14 * nC)
    dP = spectral_norm(lambda x: V @ x - ch(cht(x)), None, n, tol=tol, seed=seed, atol=1e-14 * nV)
    return {"rel_factor": dC / nC, "rel_product": dP / nV}


def condition_estimate(C) -> float:
    """kappa_2(V) = kappa_2(C)^2 from the Cholesky factor."""
    s = np.linalg.svd(_mat(C), compute_uv=False)
    return float((s[0] / s[-1]) ** 2)
