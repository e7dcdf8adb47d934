"""Galerkin matrix of the Laplace single-layer operator with piecewise constants.

2D entries use the analytic antiderivative of log-distance along the inner
segment and Gauss-Legendre on the outer one (graded towards a shared vertex,
closed form for identical segments).  3D entries classify each pair as
identical / common edge / common vertex / regular; the singular cases are
reduced to smooth integrals by polar (Duffy-type) coordinates in the
relative variables, regular pairs get tensor Gauss with order by distance.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy import integrate

from .mesh import BoundaryMesh
from .quadrature import gauss_legendre, graded_gauss, triangle_rule

FOUR_PI = 4.0 * math.pi
TWO_PI = 2.0 * math.pi


class QuadratureError(RuntimeError):
    """Oracle failed to reach its tolerance; ``estimate`` holds the best value."""

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


def kernel_eval(dim: int, x, y):
    """Laplace fundamental solution G(x - y); broadcasts over leading axes."""
    r = np.linalg.norm(np.asarray(x, float) - np.asarray(y, float), axis=-1)
    if np.any(r == 0):
        raise ValueError("kernel evaluated at coincident points")
    if dim == 2:
        return -np.log(r) / TWO_PI
    if dim == 3:
        return 1.0 / (FOUR_PI * r)
    raise ValueError(f"unsupported dimension {dim}")


# ---------------------------------------------------------------- 2D

def _log_segment_integral(x, a, u, length):
    """int_0^length log|x - a - t u| dt for points x (..., 2) and unit u."""
    d = x - a
    p = d[..., 0] * u[..., 0] + d[..., 1] * u[..., 1]
    q = np.abs(d[..., 0] * u[..., 1] - d[..., 1] * u[..., 0])

    def F(s):
        r2 = s * s + q * q
        with np.errstate(divide="ignore", invalid="ignore"):
            lg = np.where(r2 > 0, 0.5 * s * np.log(np.where(r2 > 0, r2, 1.0)), 0.0)
        return lg - s + q * np.arctan2(s, q)

    return F(length - p) - F(-p)


def _identical_2d(length):
    return length**2 * (1.5 - np.log(length)) / TWO_PI


_GAUSS_2D = 16


def _block_2d(mesh: BoundaryMesh, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    c = mesh.corners
    a, b = c[:, 0], c[:, 1]
    L = mesh.measures
    u = (b - a) / L[:, None]
    s, w = gauss_legendre(_GAUSS_2D)
    xs = a[rows, None, :] + s[None, :, None] * (b - a)[rows, None, :]  # (R, Q, 2)
    wx = w[None, :] * L[rows, None]
    inner = _log_segment_integral(
        xs[:, None, :, :], a[None, cols, None, :], u[None, cols, None, :], L[None, cols, None]
    )  # (R, C, Q)
    out = -np.einsum("rcq,rq->rc", inner, wx) / TWO_PI

    # identical and vertex-sharing pairs
    er, ec = mesh.elements[rows], mesh.elements[cols]
    share = (er[:, None, :, None] == ec[None, :, None, :]).any(axis=(2, 3))
    ri, ci = np.nonzero(share)
    for i, k in zip(ri, ci):
        out[i, k] = _singular_entry_2d(mesh, rows[i], cols[k])
    return out


def _singular_entry_2d(mesh: BoundaryMesh, j: int, k: int) -> float:
    if j == k:
        return float(_identical_2d(mesh.measures[j]))
    ej, ek = mesh.elements[j], mesh.elements[k]
    c = mesh.corners
    a, b = c[j]
    if ej[1] in ek:  # orient the outer segment so s=0 is the shared vertex
        a, b = b, a
    L = mesh.measures[j]
    s, w = graded_gauss(_GAUSS_2D, 24)
    xs = a + s[:, None] * (b - a)
    ak, bk = c[k]
    Lk = mesh.measures[k]
    inner = _log_segment_integral(xs, ak, (bk - ak) / Lk, Lk)
    return float(-L * np.dot(w, inner) / TWO_PI)


# ---------------------------------------------------------------- 3D

_SECTORS = np.array([0, 0.5, 0.75, 1.0, 1.5, 1.75, 2.0]) * math.pi
_ANGLE_ORDER = 32
_FACE_ORDER = 12
_VERTEX_ORDER = 10


def _gauge_identical(w1, w2):
    return np.maximum(0, w1) + np.maximum(0, w2) - np.minimum(0, w1 + w2)


def _identical_3d(e1, e2, area):
    """Batched self-interaction for triangles spanned by e1, e2 (P, 3).

    With the relative reference variable z, the overlap area of the reference
    triangle with its z-translate is (1 - g(z))^2 / 2, g piecewise linear and
    1-homogeneous; the radial integral is then exact, leaving one integral in
    the angle split where g changes formula.
    """
    x, w = gauss_legendre(_ANGLE_ORDER)
    th = (_SECTORS[:-1, None] + (_SECTORS[1:] - _SECTORS[:-1])[:, None] * x).ravel()
    wt = ((_SECTORS[1:] - _SECTORS[:-1])[:, None] * w).ravel()
    c, s = np.cos(th), np.sin(th)
    Jw = e1[:, None, :] * c[None, :, None] + e2[:, None, :] * s[None, :, None]
    f = 1.0 / (6.0 * _gauge_identical(c, s)[None, :] * np.linalg.norm(Jw, axis=-1))
    return (2 * area) ** 2 * (f @ wt) / FOUR_PI


def _edge_cone_triangles():
    e1, e2, e3 = np.eye(3)
    m1 = np.array([0, 0.5, 0.5])
    m2 = np.array([0.5, 0, 0.5])
    m3 = np.array([-0.5, 0.5, 0])
    return np.array([
        [e3, m1, m2], [e1, e2, m1], [e1, m1, m2],
        [e2, m1, m3], [-e1, e3, m1], [-e1, m1, m3],
    ])


_EDGE_TRIS = _edge_cone_triangles()


def _common_edge_3d(E, a, b, area_j, area_k):
    """Batched pairs x = v0 + E s + a t, y = v0 + E s' + b t' sharing edge E.

    Relative coordinates w = (s - s', t, t') reduce the overlap length to
    1 - g(w) with g 1-homogeneous; after the exact radial integral, the
    angular part lives on the L1 sphere, cut into triangles where g is linear.
    """
    pts, wts = triangle_rule(_FACE_ORDER)
    Q0, Q1, Q2 = _EDGE_TRIS[:, 0], _EDGE_TRIS[:, 1], _EDGE_TRIS[:, 2]
    P = (Q0[:, None] + pts[None, :, 0, None] * (Q1 - Q0)[:, None] + pts[None, :, 1, None] * (Q2 - Q0)[:, None])
    P = P.reshape(-1, 3)
    dets = np.abs(np.linalg.det(_EDGE_TRIS))
    W = (dets[:, None] * wts[None, :]).ravel()
    g = np.maximum(0, P[:, 0]) + np.maximum(P[:, 1], P[:, 2] - P[:, 0])
    vec = (E[:, None, :] * P[None, :, 0, None] + a[:, None, :] * P[None, :, 1, None]
           - b[:, None, :] * P[None, :, 2, None])
    f = 1.0 / (6.0 * g**2 * np.linalg.norm(vec, axis=-1))
    return 4 * area_j * area_k * (f @ W) / FOUR_PI


def _common_vertex_3d(A1, A2, B1, B2, area_j, area_k):
    """Batched pairs sharing only the origin vertex; A*, B* are edge vectors.

    Splitting T x T by which simplex coordinate sum dominates gives two
    cones from the singular point; the radial variable integrates to 1/3.
    """
    x, wx = gauss_legendre(_VERTEX_ORDER)
    tp, tw = triangle_rule(_VERTEX_ORDER)

    def half(C1, C2, D1, D2):
        # outer edge point of the first triangle, full second triangle
        pe = C1[:, None, :] * x[None, :, None] + C2[:, None, :] * (1 - x)[None, :, None]
        pt = D1[:, None, :] * tp[None, :, 0, None] + D2[:, None, :] * tp[None, :, 1, None]
        r = np.linalg.norm(pe[:, :, None, :] - pt[:, None, :, :], axis=-1)
        return np.einsum("pij,i,j->p", 1.0 / r, wx, tw) / 3.0

    total = half(A1, A2, B1, B2) + half(B1, B2, A1, A2)
    return 4 * area_j * area_k * total / FOUR_PI


def _regular_3d(org_j, org_k, area_j, area_k, e1j, e2j, e1k, e2k, n):
    pts, wts = triangle_rule(n)
    xj = org_j[:, None, :] + pts[None, :, 0, None] * e1j[:, None, :] + pts[None, :, 1, None] * e2j[:, None, :]
    xk = org_k[:, None, :] + pts[None, :, 0, None] * e1k[:, None, :] + pts[None, :, 1, None] * e2k[:, None, :]
    r = np.linalg.norm(xj[:, :, None, :] - xk[:, None, :, :], axis=-1)
    return 4 * area_j * area_k * np.einsum("pij,i,j->p", 1.0 / r, wts, wts) / FOUR_PI


def _regular_order(ratio):
    return np.select([ratio >= 4.0, ratio >= 2.0, ratio >= 1.0], [4, 6, 9], default=13)


def _block_3d(mesh: BoundaryMesh, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    c = mesh.corners
    el = mesh.elements
    area = mesh.measures
    out = np.empty((len(rows), len(cols)))
    R, C = np.meshgrid(np.arange(len(rows)), np.arange(len(cols)), indexing="ij")
    R, C = R.ravel(), C.ravel()
    J, K = rows[R], cols[C]
    shared = (el[J][:, :, None] == el[K][:, None, :])
    nshared = shared.sum(axis=(1, 2))

    reg = nshared == 0
    if reg.any():
        jj, kk = J[reg], K[reg]
        dist = np.linalg.norm(mesh.centroids[jj] - mesh.centroids[kk], axis=1)
        ratio = dist / np.maximum(mesh.diameters[jj], mesh.diameters[kk])
        order = _regular_order(ratio)
        vals = np.empty(len(jj))
        for n in np.unique(order):
            sel = np.nonzero(order == n)[0]
            for chunk in np.array_split(sel, max(1, len(sel) * n**4 // 2_000_000)):
                a, b = jj[chunk], kk[chunk]
                vals[chunk] = _regular_3d(
                    c[a, 0], c[b, 0], area[a], area[b],
                    c[a, 1] - c[a, 0], c[a, 2] - c[a, 0], c[b, 1] - c[b, 0], c[b, 2] - c[b, 0], int(n),
                )
        out[R[reg], C[reg]] = vals

    same = nshared == 3
    if same.any():
        jj = J[same]
        out[R[same], C[same]] = _identical_3d(c[jj, 1] - c[jj, 0], c[jj, 2] - c[jj, 0], area[jj])

    edge = nshared == 2
    if edge.any():
        idx = np.nonzero(edge)[0]
        v0 = np.empty((len(idx), 3)); v1 = np.empty_like(v0); pa = np.empty_like(v0); pb = np.empty_like(v0)
        for t, p in enumerate(idx):
            ej, ek = el[J[p]], el[K[p]]
            common = [v for v in ej if v in ek]
            v0[t], v1[t] = mesh.vertices[common[0]], mesh.vertices[common[1]]
            pa[t] = mesh.vertices[[v for v in ej if v not in common][0]]
            pb[t] = mesh.vertices[[v for v in ek if v not in common][0]]
        out[R[idx], C[idx]] = _common_edge_3d(v1 - v0, pa - v0, pb - v0, area[J[idx]], area[K[idx]])

    vert = nshared == 1
    if vert.any():
        idx = np.nonzero(vert)[0]
        arrs = np.empty((4, len(idx), 3))
        for t, p in enumerate(idx):
            ej, ek = el[J[p]], el[K[p]]
            s = [v for v in ej if v in ek][0]
            o = mesh.vertices[s]
            aj = [v for v in ej if v != s]
            bk = [v for v in ek if v != s]
            arrs[:, t] = mesh.vertices[[aj[0], aj[1], bk[0], bk[1]]] - o
        out[R[idx], C[idx]] = _common_vertex_3d(*arrs, area[J[idx]], area[K[idx]])
    return out


# ---------------------------------------------------------------- public

def assemble_block(mesh: BoundaryMesh, rows, cols) -> np.ndarray:
    """Entries V[rows][:, cols] in mesh element ordering."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if len(rows) == 0 or len(cols) == 0:
        return np.zeros((len(rows), len(cols)))
    fn = _block_2d if mesh.dim == 2 else _block_3d
    step = max(1, 2_000_000 // (len(cols) * (_GAUSS_2D if mesh.dim == 2 else 16)))
    return np.vstack([fn(mesh, rows[i:i + step], cols) for i in range(0, len(rows), step)])


def assemble_single_layer(mesh: BoundaryMesh, threads: int = 1) -> np.ndarray:
    """Dense N x N Galerkin matrix; the upper triangle is computed and mirrored."""
    n = mesh.n_elements
    V = np.zeros((n, n))
    step = 64
    starts = range(0, n, step)

    def work(i):
        rows = np.arange(i, min(i + step, n))
        V[i:i + len(rows), i:] = assemble_block(mesh, rows, np.arange(i, n))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(work, starts))
    else:
        for i in starts:
            work(i)
    iu = np.triu_indices(n, 1)
    V[(iu[1], iu[0])] = V[iu]
    return V


def assemble_rhs(mesh: BoundaryMesh, f) -> np.ndarray:
    """b_j = int_{T_j} f ds with an order-8 Gauss rule; ``f`` maps (n, dim) -> (n,)."""
    c = mesh.corners
    if mesh.dim == 2:
        s, w = gauss_legendre(8)
        pts = c[:, None, 0] + s[None, :, None] * (c[:, None, 1] - c[:, None, 0])
        wts = w[None, :] * mesh.measures[:, None]
    else:
        p, w = triangle_rule(8)
        pts = (c[:, None, 0] + p[None, :, 0, None] * (c[:, None, 1] - c[:, None, 0])
               + p[None, :, 1, None] * (c[:, None, 2] - c[:, None, 0]))
        wts = 2 * w[None, :] * mesh.measures[:, None]
    vals = np.asarray(f(pts.reshape(-1, mesh.dim)), dtype=float).reshape(wts.shape)
    return (vals * wts).sum(axis=1)


# ---------------------------------------------------------------- oracle

def triangle_potential(points, tri) -> np.ndarray:
    """Closed-form int_T 1/|x - y| dA(y) for a flat triangle ``tri`` (3, 3)."""
    x = np.atleast_2d(np.asarray(points, float))
    v = np.asarray(tri, float)
    n = np.cross(v[1] - v[0], v[2] - v[0])
    n /= np.linalg.norm(n)
    h = (x - v[0]) @ n
    rho = x - h[:, None] * n
    ah = np.abs(h)
    total = np.zeros(len(x))
    for i in range(3):
        pm, pp = v[i], v[(i + 1) % 3]
        lhat = (pp - pm) / np.linalg.norm(pp - pm)
        uhat = np.cross(lhat, n)
        P0 = (pm - rho) @ uhat
        lp = (pp - rho) @ lhat
        lm = (pm - rho) @ lhat
        R02 = P0**2 + h**2
        Rp = np.sqrt(lp**2 + R02)
        Rm = np.sqrt(lm**2 + R02)

        def rpl(R, l):
            # R + l without cancellation when l < 0
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(l >= 0, R + l, R02 / (R - l))

        with np.errstate(divide="ignore", invalid="ignore"):
            lg = np.where(np.abs(P0) > 1e-300, P0 * np.log(rpl(Rp, lp) / rpl(Rm, lm)), 0.0)
            at = np.arctan2(P0 * lp, R02 + ah * Rp) - np.arctan2(P0 * lm, R02 + ah * Rm)
        total += np.nan_to_num(lg) - ah * at
    return total


def _oracle_2d(mesh, j, k, tol):
    cj, ck = mesh.corners[j], mesh.corners[k]
    Lj, Lk = mesh.measures[j], mesh.measures[k]
    ev = []

    def inner(s):
        x = cj[0] + s * (cj[1] - cj[0])
        # parameter of the nearest point on T_k, where the log peaks
        t0 = np.clip(np.dot(x - ck[0], ck[1] - ck[0]) / Lk**2, 0.0, 1.0)
        pts = [t0] if 0.0 < t0 < 1.0 else None
        val, err = integrate.quad(
            lambda t: np.log(np.linalg.norm(x - ck[0] - t * (ck[1] - ck[0]))),
            0.0, 1.0, points=pts, epsabs=0.0, epsrel=tol / 10, limit=200,
        )
        ev.append(err * Lk)
        return val * Lk

    val, err = integrate.quad(inner, 0.0, 1.0, epsabs=0.0, epsrel=tol / 100, limit=500)
    val *= -Lj / TWO_PI
    err = (err + max(ev)) * Lj / TWO_PI
    return val, err


def _oracle_3d(mesh, j, k, tol, budget):
    tk = mesh.corners[k]
    pts, wts = triangle_rule(4)

    def rule(tri):
        e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
        x = tri[0] + pts[:, :1] * e1 + pts[:, 1:] * e2
        area2 = np.linalg.norm(np.cross(e1, e2))
        return area2 * np.dot(wts, triangle_potential(x, tk))

    def children(tri):
        a, b, c = tri
        ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
        return [np.array(t) for t in ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))]

    def refine(tri, coarse):
        kids = children(tri)
        vals = [rule(t) for t in kids]
        return kids, vals, abs(sum(vals) - coarse)

    root = mesh.corners[j]
    heap = []
    counter = 0
    kids, vals, err = refine(root, rule(root))
    heapq.heappush(heap, (-err, counter, kids, vals))
    total, total_err = sum(vals), err
    while total_err > tol * abs(total):
        if counter >= budget:
            raise QuadratureError(f"3D oracle did not reach {tol:g}", total / FOUR_PI)
        negerr, _, kids, vals = heapq.heappop(heap)
        total_err += negerr
        for t, v in zip(kids, vals):
            counter += 1
            k2, v2, e2 = refine(t, v)
            total += sum(v2) - v
            total_err += e2
            heapq.heappush(heap, (-e2, counter, k2, v2))
    return total / FOUR_PI, total_err / FOUR_PI


def entry_oracle(mesh: BoundaryMesh, j: int, k: int, target_tol: float = 1e-10,
                 budget: int = 200_000) -> float:
    """Independent reference value of V[j, k] by adaptive quadrature.

    2D: nested adaptive Gauss-Kronrod with a breakpoint at the inner
    near-singular point.  3D: closed-form inner potential of the flat
    triangle and adaptive 4-way subdivision of the outer triangle.
    """
    if mesh.dim == 2:
        val, err = _oracle_2d(mesh, j, k, target_tol)
    else:
        val, err = _oracle_3d(mesh, j, k, target_tol, budget)
    if err > target_tol * abs(val):
        raise QuadratureError(f"oracle error estimate {err:.3g} exceeds tolerance", val)
    return float(val)


# ---------------------------------------------------------------- binary dump

def save_dense(A: np.ndarray, path) -> None:
    A = np.asarray(A, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(f"{A.shape[0]} {A.shape[1]}\n".encode())
        fh.write(np.ascontiguousarray(A).tobytes())


def load_dense(path) -> np.ndarray:
    with open(path, "rb") as fh:
        rows, cols = (int(t) for t in fh.readline().split())
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{Path(path).name}: expected {rows * cols} values, found {data.size}")
    return data.reshape(rows, cols).copy()
