import math

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from hbem.clustering import (box_distance, build_block_partition, build_cluster_tree,
                             build_cluster_tree_from_points, cluster_stats, clusters_admissible,
                             is_admissible, sparsity_constant, tree_depth)
from hbem.mesh import generate_lshape_boundary

from conftest import lshape


def collinear(n=100, n_leaf=25):
    pts = np.c_[np.arange(n, dtype=float), np.zeros(n)]
    return build_cluster_tree_from_points(pts, n_leaf)


def test_single_leaf():
    mesh = generate_lshape_boundary(3, 0.5)   # 24 elements
    tree = build_cluster_tree(mesh, 25)
    assert tree_depth(tree) == 0 and tree.root.is_leaf
    part = build_block_partition(tree)
    assert len(part.blocks) == 1 and not part.blocks[0].admissible
    assert sparsity_constant(part) == 0


def test_collinear_tree():
    tree = collinear()
    assert tree_depth(tree) == 2
    assert [leaf.size for leaf in tree.leaves()] == [25, 25, 25, 25]
    np.testing.assert_array_equal(tree.perm, np.arange(100))


def test_collinear_far_blocks_brute_force():
    tree = collinear()
    part = build_block_partition(tree, 2.0)
    leaves = tree.leaves()
    # leaf boxes: side 24, separation 1 between neighbours; only non-adjacent
    # leaves at distance >= 12 are admissible
    far_leaf_pairs = {(b.row.id, b.col.id) for b in part.far if b.row.is_leaf and b.col.is_leaf}
    for a in leaves:
        for b in leaves:
            adjacent = abs(a.start - b.start) <= 25
            if (a.id, b.id) in far_leaf_pairs:
                assert not adjacent and clusters_admissible(a, b, 2.0)
    # brute-force sparsity constant
    counts = {}
    for b in part.far:
        counts[("r", b.row.id)] = counts.get(("r", b.row.id), 0) + 1
        counts[("c", b.col.id)] = counts.get(("c", b.col.id), 0) + 1
    assert sparsity_constant(part) == max(counts.values())


def test_admissibility_examples():
    a = (np.array([0.5, 0.5]), 1.0)
    assert is_admissible(a, (np.array([4.5, 0.5]), 1.0), 2.0)
    assert not is_admissible(a, (np.array([2.0, 0.5]), 1.0), 2.0)
    assert not is_admissible(a, (np.array([1.5, 0.5]), 1.0), 100.0)
    assert math.isclose(box_distance([0.5, 0.5], 1.0, [4.5, 0.5], 1.0), 3.0)


def test_admissibility_symmetric():
    a, b = (np.array([0., 0, 0]), 1.0), (np.array([3., 2, 0]), 0.5)
    assert is_admissible(a, b, 1.0) == is_admissible(b, a, 1.0)


def test_partition_tiles_and_admissible():
    for n in (64, 256, 512):
        mesh, tree, part, _ = lshape(n)
        assert np.all(part.coverage_mask() == 1)
        assert sum(b.row.size * b.col.size for b in part.blocks) == n * n
        for b in part.far:
            assert clusters_admissible(b.row, b.col, part.eta)
        for b in part.near:
            assert b.row.size <= tree.n_leaf and b.col.size <= tree.n_leaf


def test_tree_invariants():
    mesh, tree, _, _ = lshape(512)
    assert sorted(tree.perm) == list(range(512))
    inv = tree.iperm
    np.testing.assert_array_equal(inv[tree.perm], np.arange(512))
    for c in tree.nodes:
        assert tree.nodes[c.id] is c
        idx = tree.perm[c.slice]
        lo, hi = mesh.element_lo[idx].min(0), mesh.element_hi[idx].max(0)
        assert np.all(lo >= c.center - c.side / 2 - 1e-14) and np.all(hi <= c.center + c.side / 2 + 1e-14)
        if c.sons:
            a, b = c.sons
            assert a.start == c.start and a.stop == b.start and b.stop == c.stop
            assert a.level == b.level == c.level + 1
        else:
            assert c.size <= 25


def test_symmetric_partition():
    _, _, part, _ = lshape(256)
    far = {(b.row.id, b.col.id) for b in part.far}
    assert far == {(c, r) for r, c in far}


def test_depth_and_csp_growth():
    stats = []
    for r in (64, 128, 256, 512):
        tree = build_cluster_tree(generate_lshape_boundary(r, 0.5), 25)
        stats.append(cluster_stats(build_block_partition(tree, 2.0)))
    # midpoint splits shave only a quarter off clusters at the L's corners,
    # so depth grows by two levels per doubling: still logarithmic
    for s in stats:
        assert s["depth"] <= 2 * math.ceil(math.log2(s["N"] / 25)) + 1
    for a, b in zip(stats, stats[1:]):
        assert b["depth"] - a["depth"] <= 2
    assert max(s["C_sp"] for s in stats) <= 2 * min(s["C_sp"] for s in stats)


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 300), st.integers(2, 3)),
              elements=st.floats(-10, 10, allow_nan=False)),
       st.integers(1, 30))
def test_random_points_partition(points, n_leaf):
    tree = build_cluster_tree_from_points(points, n_leaf)
    assert sorted(tree.perm) == list(range(len(points)))
    for c in tree.leaves():
        assert c.size <= n_leaf
    part = build_block_partition(tree, 2.0)
    if len(points) <= 150:
        assert np.all(part.coverage_mask() == 1)
    assert sum(b.row.size * b.col.size for b in part.blocks) == len(points) ** 2
