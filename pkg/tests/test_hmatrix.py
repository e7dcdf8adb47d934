import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hbem.clustering import Block, BlockPartition, build_block_partition, build_cluster_tree_from_points
from hbem.hmatrix import (aggregate_error_bound, compress_dense, compress_forward, difference_norm,
                          inverse_error, partition_storage, permute, storage_report)
from hbem.linalg import dense_inverse

from conftest import lshape


def collinear_partition(n=100, n_leaf=25):
    tree = build_cluster_tree_from_points(np.c_[np.arange(n, dtype=float), np.zeros(n)], n_leaf)
    return build_block_partition(tree, 2.0)


def test_storage_hand_count():
    part = collinear_partition()
    far = [(b.row.size, b.col.size) for b in part.far]
    near = [(b.row.size, b.col.size) for b in part.near]
    # leaf boxes have side 24 (diam 24*sqrt(2) ~ 33.9); leaves one apart are
    # 26 away, so only direct neighbours and the diagonal stay near
    assert sorted(far) == [(25, 25)] * 6
    assert len(near) == 10
    for r in (0, 1, 3, 30):
        vals = 10 * 625 + 6 * min(r, 25) * 50
        st_ = partition_storage(part, r)
        assert st_["bytes"] == 8 * vals
        assert st_["compression_percent"] == pytest.approx(100 * vals / 100**2, rel=1e-15)
    A = np.random.default_rng(0).standard_normal((100, 100))
    for r in (1, 3):
        assert storage_report(compress_dense(A, part, r))["bytes"] == partition_storage(part, r)["bytes"]


def test_full_rank_roundtrip(rng):
    _, tree, part, V = lshape(256)
    H = compress_dense(V, part, None)
    x = rng.standard_normal(256)
    np.testing.assert_allclose(H.matvec(x), V @ x, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(H.rmatvec(x), V.T @ x, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(H.to_dense(), V, atol=1e-14)
    X = rng.standard_normal((256, 3))
    np.testing.assert_allclose(H.matvec(X), V @ X, rtol=1e-12, atol=1e-14)
    np.testing.assert_array_equal(permute(V, part)[np.ix_(tree.iperm, tree.iperm)], V)


def test_inverse_error_exact_and_rank_zero():
    _, _, part, V = lshape(256)
    W = dense_inverse(V)
    assert inverse_error(V, compress_dense(W, part, None)) <= 1e-8
    H0 = compress_dense(W, part, 0)
    dense = np.linalg.norm(np.eye(256) - V @ H0.to_dense(), 2)
    assert abs(inverse_error(V, H0) - dense) <= 1e-6 * dense


def test_error_decreases_in_r():
    _, _, part, V = lshape(256)
    W = dense_inverse(V)
    errs = [inverse_error(V, compress_dense(W, part, r)) for r in range(1, 8)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_bound_trivial_cases():
    part = collinear_partition()
    assert aggregate_error_bound([0.0] * len(part.blocks), part) == 0.0
    errs = [0.5 if (b.admissible and b.row.start == 0) else 0.0 for b in part.blocks]
    assert aggregate_error_bound(errs, part, c_sp=1) == 0.5


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 6))
def test_bound_dominates_error(seed, r):
    _, _, part, _ = lshape(256)
    A = np.random.default_rng(seed).standard_normal((256, 256))
    H = compress_dense(A, part, r, permuted=True)
    measured = np.linalg.norm(A - H.to_dense(permuted=True), 2)
    assert measured <= aggregate_error_bound(H.block_errors, part)


def test_forward_compression(rng):
    mesh, tree, part, V = lshape(512)
    x = rng.standard_normal(512)
    errs = []
    for k in (2, 4, 8):
        H = compress_forward(mesh, part, k)
        errs.append(np.abs(H.matvec(x) - V @ x).max() / np.abs(V @ x).max())
    assert errs[0] > errs[1] > errs[2]
    assert difference_norm(V, compress_forward(mesh, part, 12)) < 1e-9 * np.linalg.norm(V, 2)
