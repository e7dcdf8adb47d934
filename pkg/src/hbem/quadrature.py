"""Quadrature rules: Gauss-Legendre on [0, 1] and collapsed Gauss on the unit triangle."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def graded_gauss(n: int, levels: int, ratio: float = 0.15) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss rule on [0, 1] geometrically graded towards 0.

    Integrates functions like s*log(s) to near machine precision.
    """
    edges = np.concatenate([[0.0], ratio ** np.arange(levels, 0, -1), [1.0]])
    x, w = gauss_legendre(n)
    a, b = edges[:-1, None], edges[1:, None]
    return (a + (b - a) * x).ravel(), ((b - a) * w).ravel()


@lru_cache(maxsize=None)
def triangle_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n*n point rule on {x, y >= 0, x + y <= 1}; weights sum to 1/2.

    Gauss-Jacobi(0, 1) in the collapsed direction absorbs the Duffy Jacobian,
    so the rule is exact for polynomials of total degree 2n - 1.
    """
    xl, wl = roots_legendre(n)
    xj, wj = roots_jacobi(n, 0.0, 1.0)
    u = 0.5 * (xj + 1.0)  # collapsed coordinate
    wu = 0.25 * wj
    v = 0.5 * (xl + 1.0)
    wv = 0.5 * wl
    U, V = np.meshgrid(u, v, indexing="ij")
    pts = np.stack([U * (1.0 - V), U * V], axis=-1).reshape(-1, 2)
    # x = u(1-v), y = uv has Jacobian u; Gauss-Jacobi weight (1+t) supplies it
    wts = np.outer(wu, wv).ravel()
    return pts, wts
