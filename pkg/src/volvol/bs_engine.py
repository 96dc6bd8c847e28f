"""Black-Scholes base prices and their log-spot derivatives.

At zero vol-of-vol the terminal log-price is Gaussian,
``X_T = x + Y_T - Sigma_T / 2`` with ``Y_T ~ N(0, Sigma_T)``. The ``l``-th
derivative in ``x`` of ``E[f(X_T)]`` equals ``l!/Sigma_T^l E[f(X_T) H_l(Y_T, Sigma_T)]``,
which is what :func:`log_spot_derivative` evaluates.

Expectations are computed with Gauss-Legendre panels over a truncated
standard-normal range, split at the payoff's kinks and jumps so each panel
integrates an analytic function.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Callable

import numpy as np
from scipy import special

from .curves import Curve
from .errors import ConfigurationError, DomainError, UnsupportedOrderError
from .quadrature import _gl, gauss_legendre

MAX_DERIVATIVE_ORDER = 12
_Z_RANGE = 14.0


def _ncdf(x):
    return special.ndtr(x)


# ---------------------------------------------------------------- payoffs
class Payoff:
    """A European payoff written as a function of the terminal log-price."""

    lipschitz: bool = True
    growth: float = 1.0  # exponent: |f(X)| <= C (1 + e^{growth X})

    def __call__(self, logx):  # pragma: no cover - abstract
        raise NotImplementedError

    def breakpoints(self) -> tuple:
        """Log-price locations where the payoff is not analytic."""
        return ()

    def gaussian_expectation(self, mean, var):
        """``E[f(mean + sqrt(var) Z)]`` for ``Z ~ N(0, 1)``, elementwise."""
        mean = np.asarray(mean, dtype=float)
        var = np.broadcast_to(np.asarray(var, dtype=float), mean.shape)
        sd = np.sqrt(var)
        hi = _Z_RANGE + self.growth * float(np.max(sd, initial=0.0))
        z, w = gauss_legendre(-_Z_RANGE, hi, 192)
        dens = w * np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
        vals = self(mean[..., None] + sd[..., None] * z)
        return vals @ dens

    def mean_derivatives(self, mean, var, kmax: int):
        """``[d^k/dm^k E[f(m + sqrt(v) Z)] for k = 0..kmax]``."""
        return _mean_derivatives_generic(self, mean, var, kmax)


def _mean_derivatives_generic(payoff, mean, var, kmax):
    """``d^k/dm^k E[f(m + sqrt(v) Z)] = v^(-k/2) E[f(m + sqrt(v) Z) He_k(Z)]``.

    Panels are split per path at the payoff breakpoints.
    """
    mean = np.asarray(mean, dtype=float)
    sd = np.sqrt(np.broadcast_to(np.asarray(var, dtype=float), mean.shape))
    if np.any(sd <= 0.0):
        raise DomainError("mean derivatives need a positive conditional variance")
    hi = _Z_RANGE + payoff.growth * float(np.max(sd, initial=0.0))
    cuts = [np.full(mean.shape, -_Z_RANGE)]
    for b in sorted(payoff.breakpoints()):
        cuts.append(np.clip((b - mean) / sd, -_Z_RANGE, hi))
    cuts.append(np.full(mean.shape, hi))
    x, w = _gl(96)
    acc = [np.zeros(mean.shape) for _ in range(kmax + 1)]
    for a, b in zip(cuts[:-1], cuts[1:]):
        z = a[..., None] + (b - a)[..., None] * x
        wz = (b - a)[..., None] * w * np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
        vals = payoff(mean[..., None] + sd[..., None] * z) * wz
        he_prev, he = np.ones_like(z), z
        acc[0] += vals.sum(axis=-1)
        for k in range(1, kmax + 1):
            acc[k] += (vals * he).sum(axis=-1)
            he_prev, he = he, z * he - k * he_prev
    return [acc[k] / sd ** k for k in range(kmax + 1)]


@dataclass(frozen=True)
class CallPayoff(Payoff):
    strike: float

    def __post_init__(self):
        if not self.strike > 0.0:
            raise ConfigurationError(f"strike must be positive, got {self.strike}")

    def __call__(self, logx):
        return np.maximum(np.exp(logx) - self.strike, 0.0)

    def breakpoints(self):
        return (np.log(self.strike),)

    def gaussian_expectation(self, mean, var):
        mean = np.asarray(mean, dtype=float)
        sd = np.sqrt(np.broadcast_to(np.asarray(var, dtype=float), mean.shape))
        fwd = np.exp(mean + 0.5 * sd * sd)
        with np.errstate(divide="ignore", invalid="ignore"):
            d2 = (mean - np.log(self.strike)) / sd
            price = fwd * _ncdf(d2 + sd) - self.strike * _ncdf(d2)
        return np.where(sd > 0.0, price, np.maximum(np.exp(mean) - self.strike, 0.0))

    def mean_derivatives(self, mean, var, kmax):
        if kmax > 2:
            return _mean_derivatives_generic(self, mean, var, kmax)
        mean = np.asarray(mean, dtype=float)
        sd = np.sqrt(np.broadcast_to(np.asarray(var, dtype=float), mean.shape))
        if np.any(sd <= 0.0):
            raise DomainError("mean derivatives need a positive conditional variance")
        fwd = np.exp(mean + 0.5 * sd * sd)
        d2 = (mean - np.log(self.strike)) / sd
        d1 = d2 + sd
        out = [fwd * _ncdf(d1) - self.strike * _ncdf(d2), fwd * _ncdf(d1)]
        out.append(out[1] + self.strike * np.exp(-0.5 * d2 * d2) / (np.sqrt(2.0 * np.pi) * sd))
        return out[: kmax + 1]


@dataclass(frozen=True)
class PutPayoff(Payoff):
    strike: float
    growth: float = 0.0

    def __post_init__(self):
        if not self.strike > 0.0:
            raise ConfigurationError(f"strike must be positive, got {self.strike}")

    def __call__(self, logx):
        return np.maximum(self.strike - np.exp(logx), 0.0)

    def breakpoints(self):
        return (np.log(self.strike),)

    def gaussian_expectation(self, mean, var):
        mean = np.asarray(mean, dtype=float)
        sd = np.sqrt(np.broadcast_to(np.asarray(var, dtype=float), mean.shape))
        fwd = np.exp(mean + 0.5 * sd * sd)
        with np.errstate(divide="ignore", invalid="ignore"):
            d2 = (mean - np.log(self.strike)) / sd
            price = self.strike * _ncdf(-d2) - fwd * _ncdf(-d2 - sd)
        return np.where(sd > 0.0, price, np.maximum(self.strike - np.exp(mean), 0.0))


@dataclass(frozen=True)
class DigitalPayoff(Payoff):
    """Cash-or-nothing call paying 1 when the spot ends above the strike."""

    strike: float
    lipschitz: bool = False
    growth: float = 0.0

    def __post_init__(self):
        if not self.strike > 0.0:
            raise ConfigurationError(f"strike must be positive, got {self.strike}")

    def __call__(self, logx):
        return (np.asarray(logx) > np.log(self.strike)).astype(float)

    def breakpoints(self):
        return (np.log(self.strike),)

    def gaussian_expectation(self, mean, var):
        mean = np.asarray(mean, dtype=float)
        sd = np.sqrt(np.broadcast_to(np.asarray(var, dtype=float), mean.shape))
        with np.errstate(divide="ignore", invalid="ignore"):
            p = _ncdf((mean - np.log(self.strike)) / sd)
        return np.where(sd > 0.0, p, self(mean))


@dataclass(frozen=True)
class ConstantPayoff(Payoff):
    value: float = 1.0
    growth: float = 0.0

    def __call__(self, logx):
        return np.full(np.shape(logx), float(self.value))

    def gaussian_expectation(self, mean, var):
        return np.full(np.shape(mean), float(self.value))


class SmoothPayoff(Payoff):
    """Payoff given by a callback of the terminal spot with polynomial growth.

    Parameters
    ----------
    func : callable
        Vectorized ``f(S)``.
    degree : float
        Growth degree ``d`` in ``|f(S)| <= C (1 + S^d)``; checked on a probe grid.
    """

    def __init__(self, func: Callable, degree: float = 1.0):
        if degree < 0:
            raise ConfigurationError("growth degree must be non-negative")
        self.func = func
        self.growth = float(degree)
        s = np.geomspace(1e-8, 1e8, 161)
        vals = np.asarray(func(s), dtype=float)
        if vals.shape != s.shape or not np.all(np.isfinite(vals)):
            raise ConfigurationError("payoff callback must be vectorized and finite")
        ratio = np.abs(vals) / (1.0 + s ** degree)
        if ratio[-1] > 1e3 * max(ratio[len(s) // 2], 1.0):
            raise ConfigurationError(
                f"payoff grows faster than S^{degree}; raise degree or rescale")

    def __call__(self, logx):
        return np.asarray(self.func(np.exp(logx)), dtype=float)

    def __repr__(self):
        return f"SmoothPayoff({self.func!r}, degree={self.growth})"


# ---------------------------------------------------------------- base law
@dataclass(frozen=True)
class BaseLaw:
    """Law of the zero vol-of-vol log-price ``x + Y - sigma_T / 2``."""

    x: float
    sigma_T: float
    T: float = 1.0

    def __post_init__(self):
        if not self.sigma_T > 0.0 or not np.isfinite(self.sigma_T):
            raise DomainError(f"total variance must be positive, got {self.sigma_T}")
        if not self.T > 0.0:
            raise DomainError("maturity must be positive")


def total_variance(curve: Curve, T: float) -> float:
    """``Sigma_T = int_0^T u(t) dt``."""
    if not T > 0.0:
        raise DomainError("maturity must be positive")
    return curve.integral(0.0, T)


def _panels(law: BaseLaw, payoff: Payoff, n_nodes: int):
    sd = np.sqrt(law.sigma_T)
    lo, hi = -_Z_RANGE, _Z_RANGE + payoff.growth * sd
    cuts = sorted(
        (b - law.x + 0.5 * law.sigma_T) / sd for b in payoff.breakpoints()
    )
    edges = [lo] + [c for c in cuts if lo < c < hi] + [hi]
    zs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        z, w = gauss_legendre(a, b, n_nodes)
        zs.append(z)
        ws.append(w)
    z = np.concatenate(zs)
    w = np.concatenate(ws) * np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    return z, w


def _scaled_hermite(lmax: int, z):
    """Probabilists' ``He_l(z) / l!``; equals ``H_l(sqrt(s) z, s) / s^(l/2)``."""
    out = [np.ones_like(z), z.copy()]
    for k in range(2, lmax + 1):
        out.append((z * out[-1] - out[-2]) / k)
    return out[: lmax + 1]


def base_price(law: BaseLaw, payoff: Payoff, n_nodes: int = 128) -> float:
    """``E[f(x + sqrt(Sigma_T) Z - Sigma_T / 2)]``."""
    z, w = _panels(law, payoff, n_nodes)
    sd = np.sqrt(law.sigma_T)
    return float(np.dot(w, payoff(law.x - 0.5 * law.sigma_T + sd * z)))


def log_spot_derivatives(law: BaseLaw, payoff: Payoff, lmax: int, n_nodes: int = 128) -> np.ndarray:
    """Array ``[F^0, ..., F^lmax]`` of log-spot derivatives of the base price."""
    if lmax < 0:
        raise DomainError("derivative order must be non-negative")
    if lmax > MAX_DERIVATIVE_ORDER:
        raise UnsupportedOrderError(
            f"derivative order {lmax} exceeds the supported {MAX_DERIVATIVE_ORDER}")
    z, w = _panels(law, payoff, n_nodes)
    sd = np.sqrt(law.sigma_T)
    fw = w * payoff(law.x - 0.5 * law.sigma_T + sd * z)
    he = _scaled_hermite(max(lmax, 1), z)
    # F^l = l!/S^l E[f H_l(Y,S)] with H_l(Y,S) = S^(l/2) He_l(Z)/l!
    return np.array([factorial(l) * np.dot(fw, he[l]) / sd ** l for l in range(lmax + 1)])


def log_spot_derivative(law: BaseLaw, payoff: Payoff, l: int, n_nodes: int = 128) -> float:
    """``F^l = d^l/dx^l E[f(X_T^0)]`` via the Hermite-weight identity."""
    if l < 0:
        raise DomainError("derivative order must be non-negative")
    return float(log_spot_derivatives(law, payoff, l, n_nodes)[l])


def bs_call(x: float, strike: float, sigma_T: float) -> float:
    """Closed-form undiscounted call on a spot ``e^x`` with total variance ``sigma_T``."""
    return float(CallPayoff(strike).gaussian_expectation(x - 0.5 * sigma_T, sigma_T))
