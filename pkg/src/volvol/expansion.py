"""Assembly of the weak vol-of-vol expansion and eps-convergence studies.

The order-``p`` price is

    E[f(X^0)] + sum_{i=1}^p eps^i / i! sum_k sum_{l=k}^{i+2k} E[B_{i,k} H_{l-k}] F^l

where ``F^l`` are the log-spot derivatives of the Black-Scholes price. The
expectations come either from the quadrature tables (``p <= 2``) or from
the derivative-process Monte Carlo (``p <= 4``).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import factorial
from typing import Dict, Sequence

import numpy as np

from .bs_engine import BaseLaw, DigitalPayoff, Payoff, log_spot_derivatives, total_variance
from .coefficients import DEFAULT_NODES, first_order_coeff_table, second_order_coeff_table
from .errors import ConfigurationError, DomainError, UnsupportedOrderError
from .full_model import mc_price_sweep
from .mc_engine import MAX_ORDER, MCEstimateSet, PathGrid, estimate_coefficients
from .models import ModelSpec


@dataclass
class ExpansionResult:
    """Expansion coefficients, Black-Scholes derivatives and assembled prices.

    Attributes
    ----------
    coefficients : dict
        ``(i, k, l) -> (value, stderr)``. Quadrature mode lists the entries the
        closed forms determine individually.
    f_weights : dict
        ``(i, l) -> (value, stderr)``, the summed coefficient of ``F^l`` at order ``i``.
    derivatives : array
        ``F^0 .. F^{3p}``.
    prices : dict
        ``eps -> (price, stderr)``.
    """

    order: int
    mode: str
    coefficients: Dict[tuple, tuple]
    f_weights: Dict[tuple, tuple]
    derivatives: np.ndarray
    prices: Dict[float, tuple]
    provenance: dict
    zero_checks: Dict[tuple, float] = field(default_factory=dict)
    _mc: MCEstimateSet | None = field(default=None, repr=False)

    @property
    def base_price(self) -> float:
        return float(self.derivatives[0])

    def price(self, eps: float, order: int | None = None) -> tuple:
        """Assembled ``(price, stderr)`` truncated at ``order`` (default: full)."""
        p = self.order if order is None else order
        if p > self.order:
            raise DomainError(f"result only holds terms up to order {self.order}")
        val = self.base_price
        if self._mc is not None:
            w = {}
            for (i, k, l) in self._mc.labels:
                if i <= p:
                    w[(i, k, l)] = w.get((i, k, l), 0.0) + eps ** i / factorial(i) * self.derivatives[l]
            est = self._mc.combine(w) if w else None
            return (val + (est.mean if est else 0.0), est.stderr if est else 0.0)
        for (i, l), (c, _) in self.f_weights.items():
            if i <= p:
                val += eps ** i / factorial(i) * c * self.derivatives[l]
        return (float(val), 0.0)

    def order_term(self, eps: float, i: int) -> float:
        """Contribution of order ``i`` alone."""
        return float(sum(eps ** i / factorial(i) * c * self.derivatives[l]
                         for (j, l), (c, _) in self.f_weights.items() if j == i))


def _derivs(model, payoff, T, p, x0):
    law = BaseLaw(x0, total_variance(model.curve, T), T)
    return log_spot_derivatives(law, payoff, 3 * p)


def expand_price(model: ModelSpec, payoff: Payoff, T: float, eps, p: int,
                 mode: str = "quadrature", n_paths: int = 2 ** 16, seed: int = 0,
                 n_steps: int = 256, x0: float = 0.0, antithetic: bool = True,
                 threads: int | None = None, nodes: int = DEFAULT_NODES) -> ExpansionResult:
    """Order-``p`` expansion price at one or several ``eps``.

    Parameters
    ----------
    mode : {"quadrature", "mc"}
        Quadrature tables support ``p <= 2``; Monte Carlo supports ``p <= 4``.
    n_paths, seed, n_steps, antithetic, threads
        Monte Carlo settings (ignored in quadrature mode).
    """
    if p < 1:
        raise DomainError("expansion order must be at least 1")
    if p > MAX_ORDER:
        raise UnsupportedOrderError(f"order {p} exceeds the supported maximum {MAX_ORDER}")
    if mode not in ("quadrature", "mc"):
        raise ConfigurationError(f"unknown mode {mode!r}")
    if mode == "quadrature" and p > 2:
        raise ConfigurationError("quadrature coefficients exist only up to order 2; use mode='mc'")
    if isinstance(payoff, DigitalPayoff) and model.kernel.singular_exponent > 0.0:
        warnings.warn("digital payoff with a rough kernel: the payoff is not Lipschitz, "
                      "so the expansion is not covered by its convergence hypothesis",
                      stacklevel=2)
    eps_list = [float(e) for e in np.atleast_1d(eps)]
    F = _derivs(model, payoff, T, p, x0)
    coeffs, fw, zero = {}, {}, {}
    mc = None
    if mode == "quadrature":
        t1 = first_order_coeff_table(model, T, nodes)
        cx = t1.c_xu
        coeffs = {(1, 1, 1): (0.0, 0.0), (1, 1, 2): (-0.5 * cx, 0.0), (1, 1, 3): (0.5 * cx, 0.0)}
        for l, w in t1.f_weights.items():
            fw[(1, l)] = (w, 0.0)
        if p >= 2:
            t2 = second_order_coeff_table(model, T, nodes)
            coeffs.update({(2, 1, 1): (0.0, 0.0), (2, 2, 5): (-0.5 * cx * cx, 0.0),
                           (2, 2, 6): (0.25 * cx * cx, 0.0)})
            for l, w in t2.f_weights.items():
                fw[(2, l)] = (w, 0.0)
        prov = {"mode": "quadrature", "nodes": nodes}
    else:
        grid = PathGrid(T, n_steps)
        mc = estimate_coefficients(model, grid, p, n_paths, seed, antithetic, threads=threads)
        for lab in mc.labels:
            e = mc[lab]
            coeffs[lab] = (e.mean, e.stderr)
        for i in range(1, p + 1):
            for l in range(1, 3 * i + 1):
                labs = {lab: 1.0 for lab in mc.labels if lab[0] == i and lab[2] == l}
                if labs:
                    e = mc.combine(labs)
                    fw[(i, l)] = (e.mean, e.stderr)
        # F^0 never appears and F^1 carries moments that vanish identically
        for i in range(1, p + 1):
            if (i, 1) in fw:
                m, s = fw[(i, 1)]
                zero[(i, 1)] = m / s if s > 0 else 0.0
        prov = {"mode": "mc", "seed": seed, "n_paths": n_paths, "n_steps": n_steps,
                "antithetic": antithetic}
    res = ExpansionResult(p, mode, coeffs, fw, F, {}, prov, zero, mc)
    for e in eps_list:
        res.prices[e] = res.price(e)
    return res


@dataclass
class ConvergenceStudy:
    rows: list  # dicts with eps, oracle, oracle_stderr, expansion, error, used
    order: int
    slope: float
    status: str

    def errors(self) -> np.ndarray:
        return np.array([r["error"] for r in self.rows])


def fit_slope(eps: Sequence[float], err: Sequence[float], stderr: Sequence[float]):
    """Least-squares slope of ``log|err|`` on ``log eps`` over points with ``|err| > 3 stderr``."""
    eps, err, se = map(lambda a: np.asarray(a, dtype=float), (eps, err, stderr))
    used = np.abs(err) > 3.0 * se
    if used.sum() < 2:
        return float("nan"), used
    slope = np.polyfit(np.log(eps[used]), np.log(np.abs(err[used])), 1)[0]
    return float(slope), used


def convergence_study(model: ModelSpec, payoff: Payoff, T: float, eps_grid: Sequence[float],
                      p: int, n_paths: int = 2 ** 16, seed: int = 0, n_steps: int = 512,
                      x0: float = 0.0, mode: str = "quadrature", threads: int | None = None,
                      expansion: ExpansionResult | None = None,
                      oracle: list | None = None) -> ConvergenceStudy:
    """Compare the order-``p`` expansion with the full-model oracle on an eps grid.

    The oracle runs on common random numbers with the first-order control
    variate and Richardson extrapolation over ``n_steps`` and ``n_steps / 2``
    (falling back to the zero vol-of-vol control variate when ``|rho| = 1``).
    ``expansion`` and ``oracle`` may be passed in to reuse work across orders.
    """
    eps_grid = [float(e) for e in eps_grid]
    if len(eps_grid) < 4:
        raise DomainError("need at least four eps points")
    if any(not 0.0 < e <= 0.5 for e in eps_grid):
        raise DomainError("eps grid must lie in (0, 0.5]")
    if expansion is None:
        expansion = expand_price(model, payoff, T, eps_grid, p, mode=mode, x0=x0,
                                 n_paths=n_paths, seed=seed, threads=threads)
    if oracle is None:
        oracle = mc_price_sweep(model, eps_grid, payoff, PathGrid(T, n_steps), n_paths, seed,
                                x0=x0, control_variate="auto", richardson=n_steps % 2 == 0,
                                threads=threads)
    rows = []
    for e, o in zip(eps_grid, oracle):
        val, se = expansion.price(e, p)
        err = o.mean - val
        rows.append({"eps": e, "oracle": o.mean, "oracle_stderr": o.stderr, "expansion": val,
                     "expansion_stderr": se, "error": err,
                     "stderr": float(np.hypot(o.stderr, se))})
    slope, used = fit_slope(eps_grid, [r["error"] for r in rows], [r["stderr"] for r in rows])
    for r, u in zip(rows, used):
        r["used"] = bool(u)
    status = "ok" if np.isfinite(slope) else "inconclusive"
    return ConvergenceStudy(rows, p, slope, status)
