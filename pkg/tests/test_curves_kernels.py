import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from volvol.curves import AnalyticCurve, FlatCurve, PiecewiseLinearCurve, eval_curve
from volvol.errors import ConfigurationError, DomainError, SingularityError
from volvol.kernels import (ExpSumKernel, ExponentialKernel, PowerKernel, TabulatedKernel,
                            double_kernel_integral, eval_kernel, l2_error, lift_rates,
                            markovian_lift)

CURVES = [FlatCurve(0.04, t_max=5.0),
          PiecewiseLinearCurve([(0.0, 0.04), (0.5, 0.06), (2.0, 0.03)], t_max=5.0),
          AnalyticCurve(lambda t: 0.04 + 0.01 * np.sin(t), t_max=5.0)]


# ------------------------------------------------------------------ curves
def test_flat_curve_values_and_integral():
    c = FlatCurve(0.04)
    assert eval_curve(c, 3.0) == 0.04
    assert c.integral(0.5, 2.0) == pytest.approx(0.06, rel=1e-15)
    assert c.is_flat


def test_curve_domain_errors():
    c = FlatCurve(0.04, t_max=1.0)
    with pytest.raises(DomainError):
        c(-0.1)
    with pytest.raises(DomainError):
        c(1.5)
    with pytest.raises(DomainError):
        c.integral(0.5, 0.2)


@pytest.mark.parametrize("bad", [0.0, -0.1, np.inf])
def test_flat_curve_rejects_non_positive_level(bad):
    with pytest.raises(ConfigurationError):
        FlatCurve(bad)


def test_piecewise_linear_validation():
    with pytest.raises(ConfigurationError):
        PiecewiseLinearCurve([(0.1, 0.04)])
    with pytest.raises(ConfigurationError):
        PiecewiseLinearCurve([(0.0, 0.04), (0.0, 0.05)])
    with pytest.raises(ConfigurationError):
        PiecewiseLinearCurve([(0.0, 0.04), (1.0, -0.05)])


def test_piecewise_linear_integral_matches_quad():
    c = CURVES[1]
    ref, _ = integrate.quad(lambda t: c(t), 0.1, 3.0, points=[0.5, 2.0])
    assert c.integral(0.1, 3.0) == pytest.approx(ref, rel=1e-12)
    # constant beyond the last knot
    assert c(4.0) == 0.03


def test_cell_averages_integrate_back():
    t = np.linspace(0.0, 2.0, 9)
    for c in CURVES:
        avg = c.cell_averages(t)
        assert np.sum(avg * np.diff(t)) == pytest.approx(c.integral(0.0, 2.0), rel=1e-10)


def test_shifted_curve():
    c = CURVES[1]
    assert c.shifted(0.25)(0.25) == pytest.approx(c(0.5))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 5.0), min_size=1, max_size=50))
def test_configured_curves_positive(ts):
    for c in CURVES:
        assert np.all(np.asarray(c(np.array(ts))) > 0.0)


# ----------------------------------------------------------------- kernels
KERNELS = [ExponentialKernel(1.5, 1.0), ExponentialKernel(0.7, 0.3), PowerKernel(0.5, 0.4),
           PowerKernel(1.0, 0.1), ExpSumKernel(((0.3, 0.5), (0.2, 4.0)))]


@pytest.mark.parametrize("k", KERNELS, ids=repr)
def test_kernel_primitives_match_quadrature(k):
    T = 1.3
    a = k.singular_exponent

    def smooth(x):
        # k(x) x^a has a finite limit at 0, which weighted quad may sample
        x = max(x, 1e-15)
        return k(x) * x ** a

    def q(f, power=1):
        if a > 0:
            return integrate.quad(f, 0.0, T, weight="alg", wvar=(-power * a, 0.0))[0]
        return integrate.quad(f, 0.0, T)[0]

    assert k.integral(T) == pytest.approx(q(smooth), rel=1e-10)
    assert k.sq_integral(T) == pytest.approx(q(lambda x: smooth(x) ** 2, 2), rel=1e-9)
    ref = q(lambda x: (T - x) * smooth(x))
    assert double_kernel_integral(k, T) == pytest.approx(ref, rel=1e-10)


def test_power_kernel_closed_forms():
    k = PowerKernel(0.5, 0.4)
    T = 2.0
    assert k.double_integral(T) == pytest.approx(0.5 * T ** 1.6 / (0.6 * 1.6), rel=1e-13)
    assert k.hurst == pytest.approx(0.1)


def test_power_kernel_singular_at_zero():
    with pytest.raises(SingularityError):
        PowerKernel(0.5, 0.4)(0.0)
    with pytest.raises(DomainError):
        eval_kernel(ExponentialKernel(1.0, 1.0), -0.1)


@pytest.mark.parametrize("gamma", [0.0, 0.5, 0.7])
def test_power_kernel_gamma_range(gamma):
    with pytest.raises(ConfigurationError):
        PowerKernel(1.0, gamma)


def test_exponential_equals_one_term_expsum():
    e = ExponentialKernel(1.5, 0.8)
    s = e.as_expsum()
    x = np.linspace(0.0, 3.0, 31)
    np.testing.assert_allclose(e(x), s(x), rtol=1e-15)
    assert e.double_integral(2.0) == pytest.approx(s.double_integral(2.0), rel=1e-14)


def test_tabulated_kernel_reproduces_linear_function():
    k = TabulatedKernel([0.0, 1.0, 2.0], [1.0, 0.5, 0.0])
    assert k(0.5) == pytest.approx(0.75)
    assert k.integral(2.0) == pytest.approx(1.0)
    assert k.double_integral(2.0) == pytest.approx(integrate.quad(lambda x: (2 - x) * k(x), 0, 2)[0])


def test_cell_average_matrix_rows():
    k = ExponentialKernel(1.0, 2.0)
    t = np.linspace(0.0, 1.0, 5)
    m = k.cell_average_matrix(t)
    assert m.shape == (5, 4)
    assert np.all(np.triu(m) == 0.0)
    ref = integrate.quad(lambda s: k(t[3] - s), t[1], t[2])[0] / 0.25
    assert m[3, 1] == pytest.approx(ref, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.05, 3.0), st.floats(0.01, 0.49))
def test_power_primitive_additive(a, b, gamma):
    k = PowerKernel(1.0, gamma)
    lhs = k.integral(a + b)
    rhs = k.integral(a) + integrate.quad(k, a, a + b)[0]
    assert lhs == pytest.approx(rhs, rel=1e-8)


# ---------------------------------------------------------- Markovian lift
def test_lift_rates_geometric():
    r = lift_rates(8, 2.0)
    assert r[0] == pytest.approx(0.5) and r[-1] == pytest.approx(32.0)
    np.testing.assert_allclose(np.diff(np.log(r)), np.log(r[1] / r[0]))


def test_lift_error_decreases_with_terms():
    k = PowerKernel(0.5, 0.4)
    norm = np.sqrt(k.sq_integral(1.0))
    errs = [l2_error(markovian_lift(k, n, 1.0), k, 1.0) / norm for n in (1, 2, 4, 8, 16, 20)]
    assert np.all(np.diff(errs) < 0.0)
    # regression bound fixed after first computation (0.302 at n=20)
    assert errs[-1] < 0.31


def test_lift_is_expsum_with_requested_terms():
    lift = markovian_lift(PowerKernel(0.5, 0.25), 6, 1.0)
    assert isinstance(lift, ExpSumKernel) and lift.n_terms == 6
    with pytest.raises(ConfigurationError):
        markovian_lift(TabulatedKernel([0.0, 1.0], [1.0, 0.0]), 4)
    e = ExponentialKernel(1.0, 1.0)
    assert markovian_lift(e, 4) is e
