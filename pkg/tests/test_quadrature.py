import math

import numpy as np
from hypothesis import given, settings, strategies as st

from hbem.quadrature import gauss_legendre, graded_gauss, triangle_rule


@given(st.integers(1, 20))
def test_gauss_legendre_exact(n):
    x, w = gauss_legendre(n)
    for p in range(2 * n):
        assert math.isclose(w @ x**p, 1 / (p + 1), rel_tol=1e-12)


def test_graded_rule_log_singularity():
    x, w = graded_gauss(16, 24)
    assert abs(w @ np.log(x) + 1.0) < 1e-12
    assert abs(w @ (x * np.log(x)) + 0.25) < 1e-14


@settings(max_examples=30)
@given(st.integers(1, 12), st.data())
def test_triangle_rule_exact(n, data):
    p, w = triangle_rule(n)
    a = data.draw(st.integers(0, 2 * n - 1))
    b = data.draw(st.integers(0, 2 * n - 1 - a))
    exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
    assert math.isclose(w @ (p[:, 0] ** a * p[:, 1] ** b), exact, rel_tol=1e-11)
    assert np.all(p.sum(axis=1) <= 1 + 1e-15) and np.all(p >= 0)
