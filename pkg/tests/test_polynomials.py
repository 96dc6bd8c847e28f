from math import comb, factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import hermite_e

from volvol.errors import DomainError
from volvol.polynomials import bell, enumerate_tnk, hermite, hermite_all


@pytest.mark.parametrize("n", range(0, 9))
def test_hermite_matches_probabilists_scaled(n):
    # H_n(x, s) = s^{n/2} He_n(x / sqrt(s)) / n!
    x, s = 0.31, 0.07
    c = np.zeros(n + 1)
    c[n] = 1.0
    ref = s ** (n / 2) * hermite_e.hermeval(x / np.sqrt(s), c) / factorial(n)
    assert hermite(n, x, s) == pytest.approx(ref, rel=1e-12, abs=1e-300)


def test_hermite_low_orders():
    x, s = 0.4, 0.09
    assert hermite(0, x, s) == 1.0
    assert hermite(1, x, s) == x
    assert hermite(2, x, s) == pytest.approx(0.5 * (x * x - s))
    assert hermite(3, x, s) == pytest.approx((x ** 3 - 3 * s * x) / 6)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.floats(-2.0, 2.0), st.floats(0.01, 2.0))
def test_hermite_derivative_lowers_index(n, x, s):
    h = 1e-6
    d = (hermite(n, x + h, s) - hermite(n, x - h, s)) / (2 * h)
    assert d == pytest.approx(hermite(n - 1, x, s), rel=1e-5, abs=1e-8)


def test_hermite_variance_must_be_positive():
    with pytest.raises(DomainError):
        hermite(2, 0.1, 0.0)


def test_hermite_all_vectorized():
    x = np.linspace(-1, 1, 7)
    hs = hermite_all(4, x, 0.3)
    np.testing.assert_allclose(hs[4], [hermite(4, xi, 0.3) for xi in x], rtol=1e-13)


def _stirling2(n, k):
    return sum((-1) ** j * comb(k, j) * (k - j) ** n for j in range(k + 1)) // factorial(k)


@pytest.mark.parametrize("n", range(1, 9))
def test_bell_at_ones_gives_stirling(n):
    for k in range(1, n + 1):
        assert bell(n, k, [1.0] * n) == _stirling2(n, k)


def test_bell_edge_cases():
    xs = [2.0, 3.0, 5.0, 7.0]
    assert bell(4, 1, xs) == 7.0
    assert bell(4, 4, xs) == 16.0
    assert bell(0, 0, []) == 1.0
    assert bell(3, 0, xs) == 0.0
    assert bell(3, 2, xs) == pytest.approx(3 * 2.0 * 3.0)


def test_bell_errors():
    with pytest.raises(DomainError):
        bell(2, 3, [1.0, 1.0])
    with pytest.raises(DomainError):
        bell(4, 2, [1.0, 1.0])


def test_tnk_enumeration():
    s = enumerate_tnk(4, 2)
    assert list(s.tuples) == sorted(s.tuples)
    for t in s.tuples:
        assert sum(t) == 2 and sum((j + 1) * tj for j, tj in enumerate(t)) == 4
    assert enumerate_tnk(0, 0).tuples == ((),) or list(enumerate_tnk(0, 0).tuples) == [()]
    assert len(enumerate_tnk(3, 0).tuples) == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.data())
def test_bell_scaling_homogeneity(n, data):
    k = data.draw(st.integers(1, n))
    xs = data.draw(st.lists(st.floats(-2, 2), min_size=n, max_size=n))
    a, b = 1.7, 0.6
    scaled = [a * b ** (j + 1) * x for j, x in enumerate(xs)]
    assert bell(n, k, scaled) == pytest.approx(a ** k * b ** n * bell(n, k, xs), rel=1e-10,
                                               abs=1e-10)


def test_bell_array_arguments():
    xs = [np.array([1.0, 2.0]), np.array([0.5, -1.0]), np.array([3.0, 1.0])]
    out = bell(3, 2, xs)
    np.testing.assert_allclose(out, 3 * xs[0] * xs[1])
