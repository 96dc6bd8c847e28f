"""Deterministic first- and second-order expansion coefficients by quadrature.

With ``S(t, y) = Sigma(u_t^0)(y)`` the three Bergomi-Guyon type integrals are
reduced by Fubini to one-dimensional outer integrals of two auxiliary
functions,

    J(s) = int_0^{T-s} S(s, y) dy          (total sensitivity to dbeta^1_s)
    a(t) = int_0^t S(t-y, y) sqrt(u(t-y)) dy

so that ``c_xu = rho int sqrt(u) J``, ``c_uu = int J^2`` and the second part of
``c_mu`` is ``int J a / sqrt(u)``. Integrals touching a singular kernel use
``y = L z^q`` with ``q = 1/(1 - gamma)``; outer integrals are split at ``T/2``
and clustered towards both ends (exponent ``3q``), plus splits at curve knots.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .bs_engine import total_variance
from .errors import ConfigurationError, DomainError
from .models import ModelSpec
from .quadrature import _gl, gauss_legendre, singular_nodes, two_sided_nodes

DEFAULT_NODES = 32


def _q(model: ModelSpec) -> float:
    return 1.0 / (1.0 - model.kernel.singular_exponent)


def _check_T(model: ModelSpec, T: float):
    if not T > 0.0:
        raise DomainError("maturity must be positive")
    if T > model.curve.t_max:
        raise DomainError(f"maturity {T} beyond curve range {model.curve.t_max}")


def _outer(model, T, n):
    """Outer rule on ``[0, T]``: end panels clustered, interior split at curve knots."""
    q = 3.0 * _q(model) if model.kernel.singular_exponent > 0.0 else 1.0
    knots = getattr(model.curve, "_t", np.array([]))
    cuts = [float(c) for c in knots if 0.0 < c < T]
    if not cuts:
        return two_sided_nodes(0.0, T, n, q)
    edges = [0.0] + cuts + [T]
    xs, ws = [], []
    for j, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        if j == 0:
            x, w = singular_nodes(a, b, n, q)
        elif j == len(edges) - 2:
            x, w = singular_nodes(b, a, n, q)
            w = -w
        else:
            x, w = singular_nodes(a, b, n, 1.0)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def _inner_rule(n, q):
    z, w = _gl(int(n))
    return z ** q, q * z ** (q - 1.0) * w  # y = L * zq, dy = L * wq


def _knots(model) -> np.ndarray:
    return np.asarray(getattr(model.curve, "_t", ()), dtype=float)


def _zrule(L: float, q: float, cuts, n: int, z0: float = 0.0):
    """Nodes for ``y = L z^q`` over ``z in [z0, 1]``, split where ``y`` hits ``cuts``."""
    if L <= 0.0:
        return np.zeros(1), np.zeros(1)
    zc = sorted(float((c / L) ** (1.0 / q)) for c in cuts if 0.0 < c < L)
    edges = [z0] + [c for c in zc if c > z0] + [1.0]
    ys, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        z, w = gauss_legendre(a, b, n)
        ys.append(L * z ** q)
        ws.append(L * q * z ** (q - 1.0) * w)
    return np.concatenate(ys), np.concatenate(ws)


def total_sensitivity(model: ModelSpec, s: np.ndarray, T: float, n: int = DEFAULT_NODES):
    """``J(s) = int_0^{T-s} Sigma(u_s^0)(y) dy`` for each ``s``."""
    s = np.asarray(s, dtype=float)
    L = T - s
    if model.is_affine:
        return model.sigma_tilde(model.curve(s)) * model.kernel.integral(np.maximum(L, 0.0))
    if model.curve.is_flat:
        return model.curve(s) * model.kernel.integral(np.maximum(L, 0.0))
    knots = _knots(model)
    if len(knots) > 1:
        out = np.empty_like(s)
        for i, (si, Li) in enumerate(zip(s, L)):
            y, wy = _zrule(Li, _q(model), knots - si, n)
            out[i] = np.dot(wy, model.field(si, np.maximum(y, 1e-300)))
        return out
    zq, wq = _inner_rule(n, _q(model))
    L = np.maximum(L, 0.0)
    y = np.maximum(L, 1e-300)[:, None] * zq[None, :]  # outer nodes may round onto T
    return np.sum(model.field(s[:, None], y) * wq[None, :], axis=1) * L


def spot_drift_integral(model: ModelSpec, t: np.ndarray, n: int = DEFAULT_NODES):
    """``a(t) = int_0^t Sigma(u_{t-y}^0)(y) sqrt(u(t-y)) dy``."""
    t = np.asarray(t, dtype=float)
    knots = _knots(model)
    if len(knots) > 1:
        out = np.empty_like(t)
        for i, ti in enumerate(t):
            y, wy = _zrule(ti, _q(model), ti - knots, n)
            y = np.maximum(y, 1e-300)
            r = np.maximum(ti - y, 0.0)
            out[i] = np.dot(wy, model.field(r, y) * np.sqrt(model.curve(r)))
        return out
    zq, wq = _inner_rule(n, _q(model))
    y = np.maximum(t, 1e-300)[:, None] * zq[None, :]
    r = t[:, None] - y
    vals = model.field(r, y) * np.sqrt(model.curve(r))
    return np.sum(vals * wq[None, :], axis=1) * t


def c0_xu(model: ModelSpec, T: float, n: int = DEFAULT_NODES) -> float:
    """Integrated spot/variance covariance ``rho int int Sigma(u_{t2}^0)(t1-t2) sqrt(u(t2))``."""
    _check_T(model, T)
    if model.rho == 0.0:
        return 0.0
    s, w = _outer(model, T, n)
    J = total_sensitivity(model, s, T, n)
    return float(model.rho * np.dot(w, np.sqrt(model.curve(s)) * J))


def c0_uu(model: ModelSpec, T: float, n: int = DEFAULT_NODES) -> float:
    """Integrated variance/variance covariance; equals ``int_0^T J(s)^2 ds``."""
    _check_T(model, T)
    s, w = _outer(model, T, n)
    J = total_sensitivity(model, s, T, n)
    return float(np.dot(w, J * J))


def _p1(model: ModelSpec, T: float, n: int) -> float:
    s, w = _outer(model, T, n)
    if model.is_affine:
        u = model.curve(s)
        d1 = model.sigma_tilde.deriv(1, u)
        a = spot_drift_integral(model, s, n)
        return float(np.dot(w, d1 * np.sqrt(u) * model.kernel.integral(T - s) * a))
    # Bergomi: int dt1 u(t1) int_{y2<y3<t1} g(y2) g(y3) sqrt(u(t1-y2)) sqrt(u(t1-y3))
    t1 = s
    u1 = model.curve(t1)
    if model.curve.is_flat:
        G = model.kernel.integral(t1)
        return float(np.dot(w, u1 ** 2 * 0.5 * G * G))
    q = _q(model)
    knots = _knots(model)
    if len(knots) > 1:
        total = np.zeros_like(t1)
        for i, ti in enumerate(t1):
            cuts = ti - knots
            y2, w2 = _zrule(ti, q, cuts, n)
            acc = 0.0
            for yj, wj in zip(y2, w2):
                z0 = (yj / ti) ** (1.0 / q)
                y3, w3 = _zrule(ti, q, cuts, n, z0)
                inner = np.dot(w3, model.kernel._eval(y3) * np.sqrt(model.curve(np.maximum(ti - y3, 0.0))))
                acc += wj * model.kernel._eval(yj) * np.sqrt(model.curve(ti - yj)) * inner
            total[i] = acc
        return float(np.dot(w, u1 * total))
    z, wz = _gl(int(n))
    total = np.zeros_like(t1)
    for zi, wi in zip(z, wz):
        y2 = t1 * zi ** q
        dy2 = t1 * q * zi ** (q - 1.0) * wi
        v = zi + (1.0 - zi) * z
        y3 = t1[:, None] * v[None, :] ** q
        dy3 = t1[:, None] * q * v[None, :] ** (q - 1.0) * (1.0 - zi) * wz[None, :]
        g3 = model.kernel._eval(y3) * np.sqrt(model.curve(t1[:, None] - y3))
        inner = np.sum(g3 * dy3, axis=1)
        total += dy2 * model.kernel._eval(y2) * np.sqrt(model.curve(t1 - y2)) * inner
    return float(np.dot(w, u1 * total))


def _p2(model: ModelSpec, T: float, n: int) -> float:
    s, w = _outer(model, T, n)
    J = total_sensitivity(model, s, T, n)
    a = spot_drift_integral(model, s, n)
    return float(np.dot(w, J * a / np.sqrt(model.curve(s))))


def c0_mu(model: ModelSpec, T: float, n: int = DEFAULT_NODES) -> float:
    """Second-order cross term ``rho^2 (P1 + P2/2)``.

    ``P1`` integrates ``[dSigma(u_{t2}^0) h](t1 - t2) sqrt(u(t3)) sqrt(u(t2))``
    with direction ``h = S_{t2-t3} Sigma(u_{t3}^0)``; ``P2`` uses the kernel
    ratio ``Sigma(u_{t2}^0)(t1-t2) / sqrt(u(t2))``.
    """
    _check_T(model, T)
    if model.rho == 0.0:
        return 0.0
    if model.is_affine and model.sigma_tilde.kind == "callback" and not model.sigma_tilde.derivatives:
        raise ConfigurationError("c0_mu needs the first derivative of sigma_tilde")
    return float(model.rho ** 2 * (_p1(model, T, n) + 0.5 * _p2(model, T, n)))


@dataclass
class CoeffTable:
    """Coefficients of the expansion at one order.

    ``f_weights[l]`` is the expectation multiplying ``F^l`` before the
    ``eps^i / i!`` factor.
    """

    order: int
    c_xu: float
    c_uu: float
    c_mu: float
    f_weights: Dict[int, float] = field(default_factory=dict)


def first_order_coeff_table(model: ModelSpec, T: float, n: int = DEFAULT_NODES) -> CoeffTable:
    cxu = c0_xu(model, T, n)
    return CoeffTable(1, cxu, 0.0, 0.0, {2: -0.5 * cxu, 3: 0.5 * cxu})


def second_order_coeff_table(model: ModelSpec, T: float, n: int = DEFAULT_NODES) -> CoeffTable:
    """Weights of ``F^2 ... F^6`` at second order.

    The ``F^5`` weight is ``-(c_xu)^2 / 2``: the order-two chaos of
    ``(X^(1))^2`` forces ``E[(X^(1))^2 H_3] = -2 E[(X^(1))^2 H_4]``.
    """
    cxu = c0_xu(model, T, n)
    cuu = c0_uu(model, T, n)
    cmu = c0_mu(model, T, n)
    w = {
        2: 0.25 * cuu,
        3: -cmu - 0.5 * cuu,
        4: cmu + 0.25 * cuu + 0.25 * cxu * cxu,
        5: -0.5 * cxu * cxu,
        6: 0.25 * cxu * cxu,
    }
    return CoeffTable(2, cxu, cuu, cmu, w)


def implied_vol_first_order(model: ModelSpec, k: float, T: float, eps: float,
                            n: int = DEFAULT_NODES) -> float:
    """``sigma0 + eps * sigma1(k, T)``, with ``k = log(spot / strike)``."""
    if abs(eps) > 1.0:
        raise DomainError("vol-of-vol must satisfy |eps| <= 1")
    sT = total_variance(model.curve, T)
    sig0 = np.sqrt(sT / T)
    if eps == 0.0:
        return float(sig0)
    return float(sig0 + eps * sigma1(model, k, T, n))


def sigma1(model: ModelSpec, k: float, T: float, n: int = DEFAULT_NODES) -> float:
    """First-order implied-vol correction; affine in ``k`` with root at ``Sigma_T/2``."""
    sT = total_variance(model.curve, T)
    return float((0.5 - k / sT) * c0_xu(model, T, n) / (2.0 * np.sqrt(T * sT)))


def atm_skew(model: ModelSpec, T: float, method: str = "quadrature",
             n: int = DEFAULT_NODES) -> float:
    """At-the-money skew ``|rho sigma(1) int int g / (2 T^2)|`` for the unit flat curve.

    ``method="quadrature"`` evaluates the double integral through
    :func:`c0_xu` (which equals ``rho sigma(1) int int g`` on ``u = 1``);
    ``"closed"`` uses the kernel's closed-form double integral.
    """
    curve = model.curve
    if not (curve.is_flat and np.isclose(float(curve(0.0)), 1.0, rtol=0, atol=1e-14)):
        raise ConfigurationError("atm_skew is defined for the flat unit curve u = 1")
    if method == "quadrature":
        val = c0_xu(model, T, n)
    elif method == "closed":
        val = model.rho * model.sigma_at_one() * model.kernel.double_integral(T)
    else:
        raise ConfigurationError(f"unknown skew method {method!r}")
    return float(abs(val) / (2.0 * T * T))
