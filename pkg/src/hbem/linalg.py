"""Dense Cholesky, SPD inverse and matrix-free spectral norms."""

from __future__ import annotations

import warnings
from typing import Callable

import numpy as np
from scipy.linalg import cho_solve, lapack


class NotSPDError(np.linalg.LinAlgError):
    def __init__(self, index: int):
        super().__init__(f"not SPD at index {index}")
        self.index = index


def dense_cholesky(V) -> np.ndarray:
    """Lower-triangular C with C @ C.T = V (LAPACK potrf)."""
    A = np.asarray(V, dtype=float)
    if A.shape == (0, 0):
        return A.copy()
    C, info = lapack.dpotrf(A, lower=1, clean=1)
    if info > 0:
        raise NotSPDError(info - 1)
    if info < 0:
        raise ValueError(f"potrf: illegal argument {-info}")
    return C


def dense_inverse(V, chol: np.ndarray | None = None) -> np.ndarray:
    """V^{-1} for SPD V via Cholesky solves against the identity; symmetrised."""
    C = dense_cholesky(V) if chol is None else chol
    W = cho_solve((C, True), np.eye(len(C)))
    return 0.5 * (W + W.T)


def power_iteration(apply: Callable, apply_t: Callable, n: int, tol: float = 1e-6,
                    maxiter: int = 500, seed: int = 12345, block: int = 4,
                    atol: float = 0.0) -> tuple[float, int, bool]:
    """Largest singular value by block power iteration on op^T op.

    ``apply``/``apply_t`` must accept (n, b) arrays.  A Rayleigh-Ritz step on
    the block gives the estimate, so a small gap between the two leading
    singular values does not stall convergence.  Estimates that settle
    below ``atol`` count as converged (norms at roundoff level never
    satisfy a relative test).  Returns (estimate, iterations, converged).
    """
    b = max(1, min(block, n))
    rng = np.random.default_rng(seed)
    X, _ = np.linalg.qr(rng.standard_normal((n, b)))
    lam, delta = 0.0, np.inf
    for it in range(1, maxiter + 1):
        Y = apply(X)
        lam_new = float(np.linalg.eigvalsh(Y.T @ Y)[-1])
        Z = apply_t(Y)
        if not np.any(Z):
            return 0.0, it, True
        X, _ = np.linalg.qr(Z)
        delta_new = abs(lam_new - lam)
        # geometric convergence: remaining error ~ delta * q / (1 - q)
        q = min(delta_new / delta, 0.999) if delta > 0 else 0.0
        if lam_new > 0 and it > 1 and delta_new / (1.0 - q) <= tol * lam_new:
            return float(np.sqrt(lam_new)), it, True
        if it > 2 and max(lam_new, lam) <= atol * atol:
            return float(np.sqrt(lam_new)), it, True
        if lam_new == 0.0 and lam == 0.0 and it > 1:
            return 0.0, it, True
        lam, delta = lam_new, delta_new
    return float(np.sqrt(lam)), maxiter, False


def spectral_norm(apply: Callable, apply_t: Callable | None, n: int, tol: float = 1e-6,
                  maxiter: int = 500, seed: int = 12345, atol: float = 0.0) -> float:
    """||op||_2 for an operator given by its action (apply_t=None means symmetric)."""
    est, it, ok = power_iteration(apply, apply_t or apply, n, tol, maxiter, seed, atol=atol)
    if not ok:
        warnings.warn(f"power iteration hit the {maxiter}-iteration cap", RuntimeWarning, stacklevel=2)
    return est


def matrix_norm(A, tol: float = 1e-6, seed: int = 12345) -> float:
    A = np.asarray(A)
    return spectral_norm(lambda x: A @ x, lambda x: A.T @ x, A.shape[1], tol=tol, seed=seed)
