import numpy as np
import pytest

from volvol.coefficients import c0_xu, first_order_coeff_table
from volvol.errors import ConfigurationError, DomainError
from volvol.mc_engine import (PathGrid, estimate_coefficient, estimate_coefficients,
                              estimate_moments, expansion_terms, forest_term_xm,
                              hermite_path_terminal, simulate_paths)

GRID = PathGrid(1.0, 32)


def test_path_grid():
    g = PathGrid(2.0, 4)
    assert g.dt == 0.5
    np.testing.assert_allclose(g.times, [0, 0.5, 1, 1.5, 2])
    assert g.trapezoid_weights().sum() == pytest.approx(2.0)
    for bad in [(0.0, 4), (1.0, 1), (1.0, 2.5)]:
        with pytest.raises(ConfigurationError):
            PathGrid(*bad)


def test_expansion_terms_ranges():
    t = expansion_terms(2)
    assert (1, 1, 3) in t and (2, 2, 6) in t and (1, 1, 4) not in t
    assert len(expansion_terms(1)) == 3


def test_base_martingale_has_exact_variance(three_models):
    st = simulate_paths(three_models["bergomi"], GRID, 1, 2 ** 13, 4, threads=1)
    Y = np.concatenate([s.Y for s in st])
    assert st[0].sigma_T == pytest.approx(0.04)
    # antithetic sampling makes the sample mean exactly zero
    assert abs(Y.mean()) < 1e-15
    assert Y.var() == pytest.approx(0.04, rel=0.05)
    np.testing.assert_allclose(hermite_path_terminal(st[0], 2), 0.5 * (st[0].Y ** 2 - 0.04))


@pytest.mark.parametrize("name", ["bergomi", "affine_sqrt", "affine_linear"])
def test_first_order_identities(three_models, name):
    m = three_models[name]
    est = estimate_coefficients(m, GRID, 1, 2 ** 14, 11, threads=1)
    cx = c0_xu(m, 1.0)
    # E[X1 H1] vanishes; E[X1 H2] and E[X1 H3] carry -c/2 and c/2
    assert abs(est[(1, 1, 1)].zscore(0.0)) < 4
    for l, w in first_order_coeff_table(m, 1.0).f_weights.items():
        z = est[(1, 1, l)].zscore(w)
        assert abs(z) < 4, (l, z)
    assert est[(1, 1, 3)].mean == pytest.approx(0.5 * cx, rel=0.05)


def test_moments_above_chaos_degree_vanish(three_models):
    m = three_models["affine_linear"]
    terms = [(1, 1, 3), (1, 1, 4), (2, 1, 4), (2, 2, 5)]
    est = estimate_moments(m, GRID, terms, 2 ** 14, 2, threads=1)
    for t in terms:
        assert abs(est[t].zscore(0.0)) < 4


def test_index_validation(three_models):
    m = three_models["bergomi"]
    with pytest.raises(DomainError):
        estimate_coefficient(m, GRID, 1, 1, 4, 64, 0)
    with pytest.raises(DomainError):
        estimate_coefficient(m, GRID, 1, 2, 2, 64, 0)
    with pytest.raises(DomainError):
        estimate_moments(m, GRID, [(5, 1, 1)], 64, 0)
    with pytest.raises(DomainError):
        estimate_moments(m, GRID, [], 64, 0)


def test_reproducible_and_thread_invariant(three_models):
    m = three_models["affine_sqrt"]
    a = estimate_coefficients(m, GRID, 2, 2 ** 12, 9, chunk_size=512, threads=1)
    b = estimate_coefficients(m, GRID, 2, 2 ** 12, 9, chunk_size=512, threads=3)
    np.testing.assert_array_equal(a.moments.mean, b.moments.mean)
    np.testing.assert_array_equal(a.moments.m2, b.moments.m2)
    c = estimate_coefficients(m, GRID, 2, 2 ** 12, 10, chunk_size=512, threads=1)
    assert not np.array_equal(a.moments.mean, c.moments.mean)


def test_combine_uses_covariance(three_models):
    est = estimate_coefficients(three_models["bergomi"], GRID, 1, 2 ** 12, 1, threads=1)
    a, b = est[(1, 1, 2)], est[(1, 1, 3)]
    s = est.combine({(1, 1, 2): 1.0, (1, 1, 3): 1.0})
    assert s.mean == pytest.approx(a.mean + b.mean)
    # strongly correlated terms: the naive quadrature sum would be far off
    cov = est.moments.cov
    i, j = est.labels.index((1, 1, 2)), est.labels.index((1, 1, 3))
    ref = np.sqrt((cov[i, i] + cov[j, j] + 2 * cov[i, j]) / est.moments.n)
    assert s.stderr == pytest.approx(ref)


def test_forest_term(three_models):
    m = three_models["affine_sqrt"]
    e0 = forest_term_xm(m, 0.0, GRID, 256, 0, normalized=True)
    assert e0.mean == pytest.approx(c0_xu(m, 1.0), rel=1e-3)
    assert forest_term_xm(m, 0.0, GRID, 256, 0).mean == 0.0
    with pytest.raises(ConfigurationError):
        forest_term_xm(three_models["bergomi"], 0.3, GRID, 256, 0)
    with pytest.raises(DomainError):
        forest_term_xm(m, 1.3, GRID, 256, 0)
