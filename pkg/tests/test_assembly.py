import math

import numpy as np
import pytest

from hbem.assembly import (QuadratureError, assemble_block, assemble_rhs, assemble_single_layer,
                           entry_oracle, kernel_eval, load_dense, save_dense, triangle_potential)
from hbem.linalg import dense_cholesky
from hbem.mesh import BoundaryMesh, generate_cube_surface, generate_lshape_boundary
from hbem.quadrature import gauss_legendre, triangle_rule


def test_kernel_values():
    assert kernel_eval(2, np.zeros(2), np.array([1.0, 0])) == 0.0
    assert math.isclose(kernel_eval(2, np.zeros(2), np.array([math.exp(-1), 0])), 1 / (2 * math.pi))
    assert math.isclose(kernel_eval(3, np.zeros(3), np.array([0, 1.0, 0])), 1 / (4 * math.pi))
    with pytest.raises(ValueError):
        kernel_eval(3, np.ones(3), np.ones(3))


def _two_segment_square(L):
    v = np.array([[0, 0], [L, 0], [L, L], [0, L]], dtype=float)
    return BoundaryMesh(v, np.array([[0, 1], [1, 2], [2, 3], [3, 0]]))


@pytest.mark.parametrize("L,expected", [(1.0, 0.23873241463784300), (0.5, 0.25 * (1.5 + math.log(2)) / (2 * math.pi))])
def test_identical_segment_closed_form(L, expected):
    V = assemble_single_layer(_two_segment_square(L))
    assert math.isclose(V[0, 0], expected, rel_tol=1e-14)
    assert math.isclose(entry_oracle(_two_segment_square(L), 0, 0), expected, rel_tol=1e-10)


def test_symmetry_and_spd():
    for mesh in (generate_lshape_boundary(16, 0.5), generate_cube_surface(2)):
        V = assemble_single_layer(mesh)
        assert np.array_equal(V, V.T)
        dense_cholesky(V)
        one = np.ones(len(V))
        assert one @ V @ one > 0


def test_threads_bit_identical():
    mesh = generate_lshape_boundary(24, 0.5)
    assert np.array_equal(assemble_single_layer(mesh), assemble_single_layer(mesh, threads=4))


def test_block_matches_full():
    mesh = generate_cube_surface(2)
    V = assemble_single_layer(mesh)
    rows, cols = np.array([3, 17, 40]), np.array([0, 5, 17, 47])
    np.testing.assert_allclose(assemble_block(mesh, rows, cols), V[np.ix_(rows, cols)], rtol=1e-13)


def test_far_segments_vs_tensor_gauss():
    mesh = generate_lshape_boundary(4, 0.5)
    j, k = 0, 16
    c = mesh.corners
    s, w = gauss_legendre(16)
    x = c[j, 0] + s[:, None] * (c[j, 1] - c[j, 0])
    y = c[k, 0] + s[:, None] * (c[k, 1] - c[k, 0])
    G = kernel_eval(2, x[:, None], y[None])
    ref = w @ G @ w * mesh.measures[j] * mesh.measures[k]
    assert math.isclose(entry_oracle(mesh, j, k), ref, rel_tol=1e-12)
    assert math.isclose(assemble_single_layer(mesh)[j, k], ref, rel_tol=1e-12)


def test_2d_entries_vs_oracle_sample():
    mesh = generate_lshape_boundary(2, 0.5)
    V = assemble_single_layer(mesh)
    for j, k in [(0, 0), (0, 1), (1, 2), (2, 5), (3, 4), (0, 15), (7, 8)]:
        assert math.isclose(V[j, k], entry_oracle(mesh, j, k), rel_tol=1e-10)


def test_triangle_potential_vs_quadrature():
    tri = np.array([[0.0, 0, 0], [1, 0, 0], [0.2, 0.9, 0.1]])
    pts = np.array([[0.3, 0.3, 1.0], [2.0, -1, 0.5], [0.5, 0.1, 0.3]])
    p, w = triangle_rule(40)
    y = tri[0] + p[:, :1] * (tri[1] - tri[0]) + p[:, 1:] * (tri[2] - tri[0])
    area2 = np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
    ref = [(w / np.linalg.norm(y - x, axis=1)).sum() * area2 for x in pts]
    np.testing.assert_allclose(triangle_potential(pts, tri), ref, rtol=1e-9)


@pytest.mark.parametrize("pair", [(0, 0), (0, 1), (0, 2), (0, 30), (5, 20)])
def test_3d_entries_vs_oracle(pair):
    mesh = generate_cube_surface(2)
    V = assemble_single_layer(mesh)
    j, k = pair
    assert math.isclose(V[j, k], entry_oracle(mesh, j, k, 1e-7), rel_tol=1e-6)


def test_3d_self_entry_unit_right_triangle():
    # independent Duffy-type check: polar coordinates around each quadrature point
    tri = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
    p, w = triangle_rule(30)
    x = np.c_[p, np.zeros(len(p))]
    inner = triangle_potential(x, tri)
    duffy = (w @ inner) / (4 * math.pi)
    mesh = generate_cube_surface(1)
    # cube face triangles are congruent unit right triangles
    assert math.isclose(assemble_single_layer(mesh)[0, 0], duffy, rel_tol=1e-5)


def test_oracle_budget_error():
    mesh = generate_cube_surface(1)
    with pytest.raises(QuadratureError) as info:
        entry_oracle(mesh, 0, 0, 1e-14, budget=10)
    assert info.value.estimate > 0


def test_rhs():
    mesh = generate_lshape_boundary(4, 0.5)
    np.testing.assert_allclose(assemble_rhs(mesh, lambda x: np.ones(len(x))), mesh.measures, rtol=1e-14)
    assert not np.any(assemble_rhs(mesh, lambda x: np.zeros(len(x))))
    b = assemble_rhs(mesh, lambda x: 3 * x[:, 0] - x[:, 1])
    mid = mesh.centroids
    np.testing.assert_allclose(b, (3 * mid[:, 0] - mid[:, 1]) * mesh.measures, rtol=1e-13, atol=1e-16)
    cube = generate_cube_surface(2)
    np.testing.assert_allclose(assemble_rhs(cube, lambda x: np.ones(len(x))), cube.measures, rtol=1e-13)


def test_dense_dump_roundtrip(tmp_path):
    A = np.random.default_rng(1).standard_normal((4, 7))
    save_dense(A, tmp_path / "a.bin")
    raw = (tmp_path / "a.bin").read_bytes()
    assert raw.startswith(b"4 7\n") and len(raw) == 4 + 8 * 28
    np.testing.assert_array_equal(load_dense(tmp_path / "a.bin"), A)
