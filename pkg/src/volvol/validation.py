"""Invariant suite behind ``volvol validate``.

Each check compares a computed quantity with an independent oracle
(closed form, finite differences, self-convergence or Monte Carlo with a
fixed seed) and reports a pass flag with the measured discrepancy. Monte
Carlo checks use 4-stderr bands, so with a fixed seed the outcome is
deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from .bs_engine import BaseLaw, CallPayoff, ConstantPayoff, base_price, bs_call, log_spot_derivatives
from .coefficients import (atm_skew, c0_mu, c0_uu, c0_xu, first_order_coeff_table,
                           second_order_coeff_table)
from .curves import FlatCurve
from .errors import ConfigurationError
from .expansion import expand_price
from .full_model import mc_price, simulate_spot_variance
from .kernels import ExponentialKernel, PowerKernel, l2_error, markovian_lift
from .mc_engine import PathGrid, estimate_coefficients, estimate_moments, forest_term_xm
from .models import ModelSpec
from .polynomials import bell, hermite_all


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    value: float
    tolerance: float


def default_models() -> dict:
    """The three built-in classes on an exponential kernel and flat curve."""
    k_b = ExponentialKernel(1.5, 1.0)
    k_a = ExponentialKernel(0.5, 1.0)
    u = FlatCurve(0.04)
    return {"bergomi": ModelSpec.bergomi(k_b, u, -0.7),
            "affine_sqrt": ModelSpec.affine(k_a, u, -0.7, "sqrt"),
            "affine_linear": ModelSpec.affine(k_b, u, -0.7, "linear")}


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def _suite_polynomials(cfg):
    out = []
    # d/dx H_n = H_{n-1} by central differences
    x, s, h = 0.37, 0.09, 1e-5
    hp, hm, h0 = hermite_all(6, x + h, s), hermite_all(6, x - h, s), hermite_all(6, x, s)
    err = max(abs((hp[n] - hm[n]) / (2 * h) - h0[n - 1]) for n in range(1, 7))
    out.append(Check("polynomials", "hermite_derivative", err < 1e-7, err, 1e-7))
    # B_{n,k}(1, 1, ...) are Stirling numbers of the second kind
    def stirling2(n, k):
        return sum((-1) ** j * comb(k, j) * (k - j) ** n for j in range(k + 1)) // factorial(k)
    err = max(abs(bell(n, k, [1.0] * n) - stirling2(n, k))
              for n in range(1, 8) for k in range(1, n + 1))
    out.append(Check("polynomials", "bell_stirling", err == 0.0, err, 0.0))
    return out


def call_log_derivatives(x: float, strike: float, sigma_T: float, lmax: int) -> np.ndarray:
    """Closed-form ``d^l/dx^l`` of the Black-Scholes call in the log-spot.

    ``F^1 = e^x N(d1)`` and ``d/dx [e^x N(d1)] = e^x N(d1) + K phi(d2) / s``;
    the derivatives of ``phi(d2)`` are Hermite polynomials.
    """
    from scipy.special import ndtr

    s = np.sqrt(sigma_T)
    d2 = (x - np.log(strike)) / s - 0.5 * s
    pdf = strike * np.exp(-0.5 * d2 * d2) / np.sqrt(2.0 * np.pi)
    he = [1.0, d2]
    for j in range(2, lmax):
        he.append(d2 * he[-1] - (j - 1) * he[-2])
    f1 = np.exp(x) * ndtr(d2 + s)
    out = [bs_call(x, strike, sigma_T), f1]
    for l in range(2, lmax + 1):
        out.append(f1 + pdf * sum((-1) ** j * he[j] / s ** (j + 1) for j in range(l - 1)))
    return np.array(out)


def _suite_bs(cfg):
    out = []
    for sig in (0.01, 0.04, 0.25):
        for x in (-0.2, 0.0, 0.15):
            F = log_spot_derivatives(BaseLaw(x, sig, 1.0), CallPayoff(1.0), 8)
            ref = call_log_derivatives(x, 1.0, sig, 8)
            err = float(np.max(np.abs(F - ref) / np.maximum(np.abs(ref), 1e-12)))
            out.append(Check("bs_engine", f"derivatives_closed_form[sigma_T={sig},x={x}]",
                             err < 1e-9, err, 1e-9))
    return out


def _suite_kernels(cfg):
    out = []
    k = PowerKernel(0.5, 0.4)
    errs = [l2_error(markovian_lift(k, n, 1.0), k, 1.0) for n in (1, 2, 4, 8, 16)]
    mono = bool(np.all(np.diff(errs) < 0))
    out.append(Check("kernels", "lift_error_decreasing", mono, errs[-1], errs[0]))
    e = ExponentialKernel(1.5, 1.0)
    ref = 1.5 * (1.0 - (1.0 - np.exp(-1.0)))
    err = _rel(e.double_integral(1.0), ref)
    out.append(Check("kernels", "exponential_double_integral", err < 1e-12, err, 1e-12))
    return out


def _suite_coefficients(cfg):
    out = []
    for name, m in default_models().items():
        for f in (c0_xu, c0_uu, c0_mu):
            err = _rel(f(m, 1.0, 32), f(m, 1.0, 64))
            out.append(Check("coefficients", f"self_convergence[{name},{f.__name__}]",
                             err < 1e-6, err, 1e-6))
    unit = FlatCurve(1.0)
    m = ModelSpec.bergomi(ExponentialKernel(1.0, 2.0), unit, -0.7)
    ref = -0.7 * (1.0 - (1.0 - np.exp(-2.0)) / 2.0) / 2.0
    err = _rel(c0_xu(m, 1.0), ref)
    out.append(Check("coefficients", "c0_xu_closed_form", err < 1e-10, err, 1e-10))
    for g in (0.1, 0.25, 0.4):
        mp = ModelSpec.bergomi(PowerKernel(1.0, g), unit, -0.7)
        T = np.array([0.1, 0.2, 0.5, 1.0, 2.0])
        psi = [atm_skew(mp, t) for t in T]
        slope = np.polyfit(np.log(T), np.log(psi), 1)[0]
        out.append(Check("coefficients", f"skew_exponent[gamma={g}]", abs(slope + g) < 1e-3,
                         slope, -g))
    return out


def _suite_mc(cfg):
    out = []
    n, seed = cfg["n_paths"], cfg["seed"]
    grid = PathGrid(1.0, 64)
    for name, m in default_models().items():
        terms = [(i, k, h) for i in (1, 2) for k in range(1, i + 1)
                 for h in range(i + k + 1, i + 2 * k + 3)]
        est = estimate_moments(m, grid, terms, n, seed, threads=cfg["threads"])
        z = max(abs(est[t].zscore(0.0)) for t in terms)
        out.append(Check("mc_engine", f"vanishing_moments[{name}]", z < 4.0, z, 4.0))
        t1 = first_order_coeff_table(m, 1.0)
        t2 = second_order_coeff_table(m, 1.0)
        mc = estimate_coefficients(m, grid, 2, n, seed + 1, threads=cfg["threads"])
        zs = []
        for (i, tab) in ((1, t1), (2, t2)):
            for l, w in tab.f_weights.items():
                e = mc.combine({lab: 1.0 for lab in mc.labels if lab[0] == i and lab[2] == l})
                zs.append(abs(e.zscore(w)))
        out.append(Check("mc_engine", f"coefficient_identities[{name}]", max(zs) < 4.0,
                         max(zs), 4.0))
    return out


def _suite_full_model(cfg):
    out = []
    n, seed = cfg["n_paths"], cfg["seed"]
    grid = PathGrid(1.0, 64)
    for name, m in default_models().items():
        v = simulate_spot_variance(m, 0.3, grid, seed, n_paths=n, threads=cfg["threads"])[:, -1]
        z = (v.mean() - 0.04) / (v.std(ddof=1) / np.sqrt(len(v)))
        out.append(Check("full_model", f"martingale[{name}]", abs(z) < 4.0, z, 4.0))
        p0 = mc_price(m, 0.0, CallPayoff(1.0), grid, n, seed, threads=cfg["threads"])
        z = p0.zscore(base_price(BaseLaw(0.0, 0.04, 1.0), CallPayoff(1.0)))
        out.append(Check("full_model", f"zero_volvol_price[{name}]", abs(z) < 4.0, z, 4.0))
        one = mc_price(m, 0.3, ConstantPayoff(1.0), grid, 4096, seed).mean
        out.append(Check("full_model", f"constant_payoff[{name}]", abs(one - 1.0) < 1e-12,
                         one - 1.0, 1e-12))
    m = default_models()["affine_sqrt"]
    est = forest_term_xm(m, 0.3, grid, n, seed, threads=cfg["threads"])
    target = 0.3 * c0_xu(m, 1.0)
    out.append(Check("full_model", "forest_term_sqrt", abs(est.zscore(target)) < 4.0,
                     est.zscore(target), 4.0))
    return out


def _suite_expansion(cfg):
    out = []
    n, seed = cfg["n_paths"], cfg["seed"]
    for name, m in default_models().items():
        q = expand_price(m, CallPayoff(1.0), 1.0, [0.3], 2)
        mc = expand_price(m, CallPayoff(1.0), 1.0, [0.3], 2, mode="mc", n_paths=n, seed=seed,
                          n_steps=64, threads=cfg["threads"])
        pq, (pm, se) = q.prices[0.3][0], mc.prices[0.3]
        z = (pm - pq) / se
        out.append(Check("expansion", f"mode_equivalence[{name}]", abs(z) < 4.0, z, 4.0))
        base = expand_price(m, CallPayoff(1.0), 1.0, [0.0], 2).prices[0.0][0]
        err = _rel(base, base_price(BaseLaw(0.0, 0.04, 1.0), CallPayoff(1.0)))
        out.append(Check("expansion", f"zero_eps_base[{name}]", err < 1e-14, err, 1e-14))
    return out


SUITES = {"polynomials": _suite_polynomials, "bs_engine": _suite_bs, "kernels": _suite_kernels,
          "coefficients": _suite_coefficients, "mc_engine": _suite_mc,
          "full_model": _suite_full_model, "expansion": _suite_expansion}


MIN_PATHS = 2 ** 15


def run_validation(suites=None, n_paths: int = MIN_PATHS, seed: int = 0, threads=None) -> list:
    """Run the named suites (default: all) and return the list of checks.

    The second-order weights involve eighth moments of Gaussian functionals;
    below ``MIN_PATHS`` their sample stderr is unreliable, so smaller runs are
    refused.
    """
    names = list(SUITES) if suites is None else list(suites)
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise ConfigurationError(f"unknown validation suite(s): {', '.join(unknown)}")
    if n_paths < MIN_PATHS:
        raise ConfigurationError(f"validation needs at least {MIN_PATHS} paths")
    cfg = {"n_paths": int(n_paths), "seed": int(seed), "threads": threads}
    checks = []
    for s in names:
        checks.extend(SUITES[s](cfg))
    return checks
