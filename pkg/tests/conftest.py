from __future__ import annotations

from functools import lru_cache

import numpy as np
import pytest

from hbem.assembly import assemble_single_layer
from hbem.clustering import build_block_partition, build_cluster_tree
from hbem.hmatrix import permute
from hbem.linalg import dense_inverse
from hbem.mesh import generate_lshape_boundary


@lru_cache(maxsize=None)
def lshape(n: int, n_leaf: int = 25, eta: float = 2.0):
    """(mesh, tree, partition, V) for the scaled L-shape with n elements; V in mesh ordering."""
    mesh = generate_lshape_boundary(n // 8, 0.5)
    tree = build_cluster_tree(mesh, n_leaf)
    part = build_block_partition(tree, eta)
    V = assemble_single_layer(mesh)
    V.setflags(write=False)
    return mesh, tree, part, V


@lru_cache(maxsize=None)
def lshape_ordered(n: int):
    """V and V^-1 in cluster ordering."""
    _, _, part, V = lshape(n)
    Vp = permute(V, part)
    W = permute(dense_inverse(V), part)
    Vp.setflags(write=False)
    W.setflags(write=False)
    return Vp, W


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
