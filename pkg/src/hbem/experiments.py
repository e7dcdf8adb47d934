"""Experiment runners behind the command line; each returns plot-ready rows."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import assemble_single_layer, save_dense
from .clustering import build_block_partition, build_cluster_tree, cluster_stats, sparsity_constant
from .config import ExperimentConfig, ExperimentError
from .factorization import (NotSPDError, cholesky_errors, condition_estimate, dense_cholesky,
                            h_cholesky, schur_complement, schur_rank_profile)
from .h2 import build_nested_basis, h2_compress, h2_storage_report
from .hmatrix import (aggregate_error_bound, compress_dense, inverse_error, partition_storage,
                      permute, storage_report)
from .linalg import dense_inverse, matrix_norm, spectral_norm
from .lowrank import degenerate_kernel_error
from .mesh import BoundaryMesh, generate_cube_surface, generate_lshape_boundary, load_mesh, mesh_stats

CUBE_MAX_N = 1200


@dataclass
class ExperimentResult:
    columns: list[str]
    rows: list[dict]
    fits: dict[str, float] = field(default_factory=dict)


def make_mesh(cfg: ExperimentConfig) -> BoundaryMesh:
    if cfg.geometry == "lshape":
        return generate_lshape_boundary(cfg.refinement, cfg.scale)
    if cfg.geometry == "cube":
        return generate_cube_surface(cfg.refinement, cfg.scale)
    return load_mesh(cfg.mesh_file)


def log_slope(x, y) -> float:
    """Least-squares slope of log(y) against x; nonpositive y are skipped."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    ok = y > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(x[ok], np.log(y[ok]), 1)[0])


def _check_dense(n: int, cfg: ExperimentConfig) -> None:
    if n > cfg.max_dense_n:
        raise ExperimentError(f"N={n} exceeds the dense cap {cfg.max_dense_n}; "
                              "raise --max-dense-n or use --storage-only")


def _spd_factor(V, dim: int):
    try:
        return dense_cholesky(V)
    except NotSPDError as exc:
        hint = " (2D needs diam < 1: use --scale < 1)" if dim == 2 else ""
        raise ExperimentError(f"V is not positive definite, {exc}{hint}") from None


def _clock(cfg, t0) -> float:
    return time.perf_counter() - t0 if cfg.timing else 0.0


INVERSE_COLUMNS = ["N", "eta", "n_leaf", "r", "err_spectral", "bound_lemma42", "bytes",
                   "compression_pct", "wall_seconds"]


def run_inverse_experiment(cfg: ExperimentConfig, mesh: BoundaryMesh | None = None) -> ExperimentResult:
    """||I - V W_H||_2 per rank, with the aggregated block-error certificate and storage.

    The certificate is ||V||_2 times the aggregate bound on ||W - W_H||_2.
    """
    mesh = make_mesh(cfg) if mesh is None else mesh
    n = mesh.n_elements
    tree = build_cluster_tree(mesh, cfg.n_leaf)
    part = build_block_partition(tree, cfg.eta)
    rows = []
    if cfg.storage_only:
        for r in cfg.ranks:
            t0 = time.perf_counter()
            st = partition_storage(part, r)
            rows.append({"N": n, "eta": cfg.eta, "n_leaf": cfg.n_leaf, "r": r, "err_spectral": math.nan,
                         "bound_lemma42": math.nan, "bytes": st["bytes"],
                         "compression_pct": st["compression_percent"], "wall_seconds": _clock(cfg, t0)})
        return ExperimentResult(INVERSE_COLUMNS, rows)

    _check_dense(n, cfg)
    V = assemble_single_layer(mesh, threads=cfg.threads)
    C = _spd_factor(V, mesh.dim)
    W = permute(dense_inverse(V, C.C), part)
    norm_v = matrix_norm(V, cfg.tol, cfg.seed)
    c_sp = sparsity_constant(part)
    for r in cfg.ranks:
        t0 = time.perf_counter()
        H = compress_dense(W, part, r, permuted=True)
        err = inverse_error(V, H, cfg.tol, cfg.seed)
        bound = norm_v * aggregate_error_bound(H.block_errors, part, c_sp)
        st = storage_report(H)
        rows.append({"N": n, "eta": cfg.eta, "n_leaf": cfg.n_leaf, "r": r, "err_spectral": err,
                     "bound_lemma42": bound, "bytes": st["bytes"],
                     "compression_pct": st["compression_percent"], "wall_seconds": _clock(cfg, t0)})
    errs = [row["err_spectral"] for row in rows]
    fits = {"slope_log_err_vs_r": log_slope(cfg.ranks, errs),
            "slope_log_err_vs_sqrt_r": log_slope(np.sqrt(cfg.ranks), errs)}
    return ExperimentResult(INVERSE_COLUMNS, rows, fits)


def run_3d_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Inverse compression on the cube surface; the fit of interest is log err against sqrt(r)."""
    if cfg.geometry != "cube":
        raise ExperimentError("the 3d experiment runs on --geometry cube")
    n = 12 * cfg.refinement**2
    if n > CUBE_MAX_N:
        raise ExperimentError(f"cube mesh with N={n} exceeds {CUBE_MAX_N}")
    return run_inverse_experiment(cfg)


CHOLESKY_COLUMNS = ["N", "r", "rel_factor_err", "rel_product_err", "kappa2_estimate"]


def run_cholesky_experiment(cfg: ExperimentConfig, mesh: BoundaryMesh | None = None) -> ExperimentResult:
    mesh = make_mesh(cfg) if mesh is None else mesh
    n = mesh.n_elements
    _check_dense(n, cfg)
    tree = build_cluster_tree(mesh, cfg.n_leaf)
    part = build_block_partition(tree, cfg.eta)
    V = permute(assemble_single_layer(mesh, threads=cfg.threads), part)
    C = _spd_factor(V, mesh.dim)
    kappa = condition_estimate(C)
    rows = []
    for r in cfg.ranks:
        CH = h_cholesky(V, part, r, C)
        e = cholesky_errors(V, C, CH, cfg.tol, cfg.seed)
        rows.append({"N": n, "r": r, "rel_factor_err": e["rel_factor"],
                     "rel_product_err": e["rel_product"], "kappa2_estimate": kappa})
    fits = {"slope_rel_factor": log_slope(cfg.ranks, [x["rel_factor_err"] for x in rows]),
            "slope_rel_product": log_slope(cfg.ranks, [x["rel_product_err"] for x in rows])}
    return ExperimentResult(CHOLESKY_COLUMNS, rows, fits)


SCHUR_COLUMNS = ["block_id", "level", "k", "sigma_k"]


def run_schur_profile(cfg: ExperimentConfig, min_level: int = 2, max_k: int = 20) -> ExperimentResult:
    """Singular values of S(t, s) for every admissible block with row level >= min_level."""
    mesh = make_mesh(cfg)
    _check_dense(mesh.n_elements, cfg)
    tree = build_cluster_tree(mesh, cfg.n_leaf)
    part = build_block_partition(tree, cfg.eta)
    V = permute(assemble_single_layer(mesh, threads=cfg.threads), part)
    C = _spd_factor(V, mesh.dim)
    rows = []
    worst = 0.0
    for bid, b in enumerate(part.blocks):
        if not b.admissible or b.row.level < min_level:
            continue
        s = schur_rank_profile(schur_complement(V, b.row, b.col, C))
        if len(s) > 9 and s[0] > 0:
            worst = max(worst, float(s[9] / s[0]))
        for k, sk in enumerate(s[:max_k], start=1):
            rows.append({"block_id": bid, "level": b.row.level, "k": k, "sigma_k": float(sk)})
    return ExperimentResult(SCHUR_COLUMNS, rows, {"max_sigma10_over_sigma1": worst})


H2_COLUMNS = ["N", "r", "err_spectral_h", "err_spectral_h2", "bytes_h", "bytes_h2"]


def run_h2_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Plain H versus H^2 compression of V^{-1}; errors relative to ||V^{-1}||_2."""
    mesh = make_mesh(cfg)
    n = mesh.n_elements
    _check_dense(n, cfg)
    tree = build_cluster_tree(mesh, cfg.n_leaf)
    part = build_block_partition(tree, cfg.eta)
    V = assemble_single_layer(mesh, threads=cfg.threads)
    W = permute(dense_inverse(V, _spd_factor(V, mesh.dim).C), part)
    norm_w = matrix_norm(W, cfg.tol, cfg.seed)
    rows = []
    for r in cfg.ranks:
        if r < 1:
            raise ExperimentError("H^2 bases need r >= 1")
        H = compress_dense(W, part, r, permuted=True)
        B = build_nested_basis(W, tree, part, r)
        H2 = h2_compress(W, B, B, part)
        Wh, Wh2 = H.to_dense(permuted=True), H2.to_dense(permuted=True)
        e_h = spectral_norm(lambda x: (W - Wh) @ x, None, n, cfg.tol, seed=cfg.seed)
        e_h2 = spectral_norm(lambda x: (W - Wh2) @ x, None, n, cfg.tol, seed=cfg.seed)
        rows.append({"N": n, "r": r, "err_spectral_h": e_h / norm_w, "err_spectral_h2": e_h2 / norm_w,
                     "bytes_h": storage_report(H)["bytes"], "bytes_h2": h2_storage_report(H2)["bytes"]})
    return ExperimentResult(H2_COLUMNS, rows)


KERNEL_COLUMNS = ["dim", "k", "r", "dist_ratio", "max_error"]


def kernel_decay_points(dim: int, side: float, dist_ratio: float) -> np.ndarray:
    """Two evaluation points at distance dist_ratio * diam from the cube [-side/2, side/2]^dim:
    one straight out from a face, one out from a corner along the diagonal."""
    d = dist_ratio * side * math.sqrt(dim)
    axis = np.zeros(dim)
    axis[0] = 1.0
    diag = np.ones(dim) / math.sqrt(dim)
    return np.array([(0.5 * side + d) * axis, 0.5 * side * np.ones(dim) + d * diag])


def run_kernel_decay(dim: int, ks, dist_ratio: float = 1.0, samples: int | None = None) -> ExperimentResult:
    if dim not in (2, 3):
        raise ExperimentError("dim must be 2 or 3")
    if not dist_ratio > 0:
        raise ExperimentError("dist_ratio must be > 0")
    samples = samples or (20 if dim == 2 else 12)
    box = (np.zeros(dim), 1.0)
    xs = kernel_decay_points(dim, 1.0, dist_ratio)
    rows = [{"dim": dim, "k": k, "r": (k + 1) ** dim, "dist_ratio": dist_ratio,
             "max_error": degenerate_kernel_error(box, xs, k, samples)} for k in ks]
    fits = {"slope_log_err_vs_r_root": log_slope([row["r"] ** (1 / dim) for row in rows],
                                                 [row["max_error"] for row in rows])}
    return ExperimentResult(KERNEL_COLUMNS, rows, fits)


MESH_COLUMNS = ["N", "h_min", "h_max", "quasiuniformity", "gamma"]


def run_mesh(cfg: ExperimentConfig) -> ExperimentResult:
    return ExperimentResult(MESH_COLUMNS, [mesh_stats(make_mesh(cfg))])


CLUSTER_COLUMNS = ["N", "n_leaf", "eta", "depth", "C_sp", "n_far", "n_near"]


def run_cluster(cfg: ExperimentConfig) -> ExperimentResult:
    tree = build_cluster_tree(make_mesh(cfg), cfg.n_leaf)
    return ExperimentResult(CLUSTER_COLUMNS, [cluster_stats(build_block_partition(tree, cfg.eta))])


ASSEMBLE_COLUMNS = ["N", "dim", "max_abs", "max_asymmetry", "spd", "wall_seconds"]


def run_assemble(cfg: ExperimentConfig, dump: str | None = None) -> ExperimentResult:
    mesh = make_mesh(cfg)
    _check_dense(mesh.n_elements, cfg)
    t0 = time.perf_counter()
    V = assemble_single_layer(mesh, threads=cfg.threads)
    wall = _clock(cfg, t0)
    try:
        dense_cholesky(V)
        spd = 1
    except NotSPDError:
        spd = 0
    if dump:
        save_dense(V, dump)
    return ExperimentResult(ASSEMBLE_COLUMNS, [{
        "N": mesh.n_elements, "dim": mesh.dim, "max_abs": float(np.abs(V).max()),
        "max_asymmetry": float(np.abs(V - V.T).max()), "spd": spd, "wall_seconds": wall}])
