import numpy as np
import pytest
from scipy import integrate, optimize

from volvol.bs_engine import BaseLaw, CallPayoff, bs_call, log_spot_derivatives
from volvol.coefficients import (atm_skew, c0_mu, c0_uu, c0_xu, first_order_coeff_table,
                                 implied_vol_first_order, second_order_coeff_table, sigma1)
from volvol.curves import AnalyticCurve, FlatCurve, PiecewiseLinearCurve
from volvol.errors import ConfigurationError, DomainError
from volvol.kernels import ExponentialKernel, PowerKernel
from volvol.models import ModelSpec

WAVY = AnalyticCurve(lambda t: 0.04 + 0.01 * np.sin(2.0 * t), t_max=5.0)
KINKED = PiecewiseLinearCurve([(0.0, 0.03), (0.4, 0.05), (1.5, 0.04)])


def _quad(f, a, b, kinks=()):
    pts = [c for c in kinks if a < c < b] or None
    return integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-11, limit=200, points=pts)[0]


def _oracle(model, T):
    """Nested adaptive quadrature straight from the defining integrals."""
    u, fld = model.curve, model.field
    knots = [t for t, _ in getattr(u, "knots", ())]

    def J(s):
        return _quad(lambda y: fld(s, y), 0.0, T - s, [c - s for c in knots])

    def a(t):
        return _quad(lambda y: fld(t - y, y) * np.sqrt(u(t - y)), 0.0, t, [t - c for c in knots])

    cxu = model.rho * _quad(lambda s: np.sqrt(u(s)) * J(s), 0.0, T, knots)
    cuu = _quad(lambda s: J(s) ** 2, 0.0, T, knots)
    p2 = _quad(lambda s: J(s) * a(s) / np.sqrt(u(s)), 0.0, T, knots)
    if model.is_affine:
        d1 = model.sigma_tilde.deriv
        p1 = _quad(lambda s: d1(1, u(s)) * np.sqrt(u(s)) * model.kernel.integral(T - s) * a(s),
                   0.0, T, knots)
    else:
        # symmetric inner double integral is half the square of a single one
        inner = lambda t: _quad(lambda y: model.kernel(y) * np.sqrt(u(t - y)), 0.0, t,
                                [t - c for c in knots])
        p1 = _quad(lambda t: u(t) * 0.5 * inner(t) ** 2, 0.0, T, knots)
    return cxu, cuu, model.rho ** 2 * (p1 + 0.5 * p2)


MODELS = {
    "bergomi_flat": ModelSpec.bergomi(ExponentialKernel(1.5, 1.0), FlatCurve(0.04), -0.7),
    "bergomi_wavy": ModelSpec.bergomi(ExponentialKernel(1.2, 2.0), WAVY, -0.5),
    "bergomi_kinked": ModelSpec.bergomi(ExponentialKernel(1.2, 2.0), KINKED, -0.5),
    "sqrt_wavy": ModelSpec.affine(ExponentialKernel(0.5, 1.0), WAVY, -0.7, "sqrt"),
    "linear_kinked": ModelSpec.affine(ExponentialKernel(1.5, 0.5), KINKED, 0.4, "linear"),
}


@pytest.mark.parametrize("name", list(MODELS))
def test_coefficients_match_nested_quadrature(name):
    m = MODELS[name]
    ref = _oracle(m, 1.2)
    got = (c0_xu(m, 1.2), c0_uu(m, 1.2), c0_mu(m, 1.2))
    np.testing.assert_allclose(got, ref, rtol=1e-6)


def test_bergomi_exponential_closed_form():
    phi, b, T, u, rho = 1.5, 1.0, 1.0, 0.04, -0.7
    m = ModelSpec.bergomi(ExponentialKernel(phi, b), FlatCurve(u), rho)
    # int_0^T (1 - e^{-b(T-s)})/b ds
    dbl = phi * (T - (1 - np.exp(-b * T)) / b) / b
    assert c0_xu(m, T) == pytest.approx(rho * u ** 1.5 * dbl, rel=1e-12)
    sq = phi ** 2 * _quad(lambda s: ((1 - np.exp(-b * (T - s))) / b) ** 2, 0.0, T)
    assert c0_uu(m, T) == pytest.approx(u * u * sq, rel=1e-10)


@pytest.mark.parametrize("gamma", [0.1, 0.4])
def test_rough_kernel_self_convergence(gamma):
    m = ModelSpec.bergomi(PowerKernel(0.5, gamma), FlatCurve(0.04), -0.7)
    for f in (c0_xu, c0_uu, c0_mu):
        assert f(m, 1.0, 48) == pytest.approx(f(m, 1.0, 96), rel=1e-7)
    # c0_xu closed form on a flat curve: rho u^{3/2} int int g
    assert c0_xu(m, 1.0) == pytest.approx(-0.7 * 0.04 ** 1.5 * m.kernel.double_integral(1.0),
                                          rel=1e-9)


def test_rho_zero_kills_cross_terms(three_models):
    for m in three_models.values():
        z = m.with_rho(0.0)
        assert c0_xu(z, 1.0) == 0.0 and c0_mu(z, 1.0) == 0.0
        assert c0_uu(z, 1.0) == pytest.approx(c0_uu(m, 1.0), rel=1e-14)


def test_coefficients_scale_with_kernel_weight(three_models):
    m = three_models["bergomi"]
    k = m.kernel
    m2 = m.with_kernel(ExponentialKernel(2 * k.phi, k.b))
    assert c0_xu(m2, 1.0) == pytest.approx(2 * c0_xu(m, 1.0), rel=1e-12)
    assert c0_uu(m2, 1.0) == pytest.approx(4 * c0_uu(m, 1.0), rel=1e-12)
    assert c0_mu(m2, 1.0) == pytest.approx(4 * c0_mu(m, 1.0), rel=1e-12)


def test_weight_tables(three_models):
    m = three_models["affine_sqrt"]
    t1, t2 = first_order_coeff_table(m, 1.0), second_order_coeff_table(m, 1.0)
    c = t1.c_xu
    assert t1.f_weights == {2: -0.5 * c, 3: 0.5 * c}
    assert t2.f_weights[5] == pytest.approx(-0.5 * c * c)
    assert t2.f_weights[6] == pytest.approx(0.25 * c * c)
    # weights of a martingale-preserving expansion sum to zero against F^l = const
    assert sum(t2.f_weights.values()) == pytest.approx(0.0, abs=1e-15)


def test_sigma1_root_and_slope(three_models):
    m = three_models["bergomi"]
    sT = 0.04
    assert sigma1(m, sT / 2, 1.0) == pytest.approx(0.0, abs=1e-16)
    s_lo, s_hi = sigma1(m, -0.1, 1.0), sigma1(m, 0.1, 1.0)
    assert (s_hi - s_lo) / 0.2 == pytest.approx(-c0_xu(m, 1.0) / (2 * sT ** 1.5), rel=1e-12)
    assert implied_vol_first_order(m, 0.0, 1.0, 0.0) == pytest.approx(0.2)
    with pytest.raises(DomainError):
        implied_vol_first_order(m, 0.0, 1.0, 1.5)


@pytest.mark.parametrize("k", [-0.15, 0.0, 0.1])
def test_sigma1_matches_implied_vol_of_first_order_price(three_models, k):
    m = three_models["affine_sqrt"]
    T, sT = 1.0, 0.04
    strike = np.exp(-k)
    F = log_spot_derivatives(BaseLaw(0.0, sT, T), CallPayoff(strike), 3)
    c = c0_xu(m, T)

    def iv(eps):
        price = F[0] + eps * 0.5 * c * (F[3] - F[2])
        root = optimize.brentq(lambda s: bs_call(0.0, strike, s * s * T) - price, 0.01, 1.0,
                               xtol=1e-15)
        return root

    h = 1e-3
    fd = (iv(h) - iv(-h)) / (2 * h)
    assert fd == pytest.approx(sigma1(m, k, T), rel=1e-5)


def test_atm_skew_methods_agree(rough_bergomi):
    m = ModelSpec.bergomi(PowerKernel(0.5, 0.4), FlatCurve(1.0), -0.7)
    for T in (0.1, 1.0, 2.0):
        assert atm_skew(m, T) == pytest.approx(atm_skew(m, T, method="closed"), rel=1e-9)
    with pytest.raises(ConfigurationError):
        atm_skew(rough_bergomi, 1.0)
    with pytest.raises(ConfigurationError):
        atm_skew(m, 1.0, method="spline")


def test_maturity_checks(three_models):
    m = three_models["bergomi"]
    with pytest.raises(DomainError):
        c0_xu(m, 0.0)
    short = ModelSpec.bergomi(m.kernel, FlatCurve(0.04, t_max=1.0), -0.7)
    with pytest.raises(DomainError):
        c0_uu(short, 2.0)
