"""Volatility kernels ``g`` and their closed-form integrals.

Every kernel exposes

* ``__call__(x)`` -- pointwise value,
* ``integral(x)`` -- ``int_0^x g``,
* ``sq_integral(x)`` -- ``int_0^x g^2``,
* ``double_integral(T)`` -- ``int_0^T int_0^t g(t - s) ds dt``,
* ``singular_exponent`` -- the blow-up exponent at the origin (0 when bounded).

Quadrature code elsewhere uses ``singular_exponent`` to choose a substitution
that keeps nodes away from ``x = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .errors import ConfigurationError, DomainError, SingularityError


def _phi1(z):
    """(1 - exp(-z)) / z, continuous at 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - 0.5 * z, -np.expm1(-safe) / safe)


def _phi2(z):
    """(z - 1 + exp(-z)) / z^2, continuous at 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-3
    safe = np.where(small, 1.0, z)
    series = 0.5 - z / 6.0 + z * z / 24.0 - z ** 3 / 120.0
    return np.where(small, series, (safe + np.expm1(-safe)) / (safe * safe))


def _check_x(x, singular: bool):
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)) or np.any(x < 0.0):
        raise DomainError("kernel argument must be non-negative")
    if singular and np.any(x == 0.0):
        raise SingularityError("kernel is singular at x=0; integrate around it")
    return x


def _scalar(out):
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


class Kernel:
    """Common interface for all kernel variants."""

    singular_at_zero: bool = False

    @property
    def singular_exponent(self) -> float:
        return 0.0

    def __call__(self, x):
        x = _check_x(x, self.singular_at_zero)
        return _scalar(self._eval(x))

    def integral(self, x):
        """Primitive ``G(x) = int_0^x g(s) ds``."""
        x = _check_x(x, False)
        return _scalar(self._integral(x))

    def sq_integral(self, x):
        """``int_0^x g(s)^2 ds``."""
        x = _check_x(x, False)
        return _scalar(self._sq_integral(x))

    def double_integral(self, T: float) -> float:
        """``int_0^T int_0^t g(t - s) ds dt = int_0^T (T - x) g(x) dx``."""
        if T < 0.0:
            raise DomainError("horizon must be non-negative")
        if T == 0.0:
            return 0.0
        return float(self._double_integral(float(T)))

    def cell_average_matrix(self, times: np.ndarray) -> np.ndarray:
        """Lower-triangular matrix of kernel cell averages.

        Entry ``(i, j)`` for ``j < i`` is ``(1/dt_j) int_{t_j}^{t_{j+1}} g(t_i - s) ds``
        on the grid ``times``; row ``i`` refers to time ``times[i]``.
        """
        times = np.asarray(times, dtype=float)
        n = len(times)
        lag_hi = times[:, None] - times[None, :-1]
        lag_lo = times[:, None] - times[None, 1:]
        mask = lag_lo >= 0.0
        hi = self.integral(np.where(mask, lag_hi, 0.0))
        lo = self.integral(np.where(mask, lag_lo, 0.0))
        dt = np.diff(times)[None, :]
        out = np.where(mask, (hi - lo) / dt, 0.0)
        assert out.shape == (n, n - 1)
        return out

    # subclasses
    def _eval(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def _integral(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def _sq_integral(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def _double_integral(self, T):  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class ExponentialKernel(Kernel):
    """``g(x) = phi * exp(-b x)``."""

    phi: float
    b: float

    def __post_init__(self):
        if not self.phi >= 0.0 or not np.isfinite(self.phi):
            raise ConfigurationError(f"phi must be non-negative, got {self.phi}")
        if not self.b > 0.0 or not np.isfinite(self.b):
            raise ConfigurationError(f"b must be positive, got {self.b}")

    def _eval(self, x):
        return self.phi * np.exp(-self.b * x)

    def _integral(self, x):
        return self.phi * x * _phi1(self.b * x)

    def _sq_integral(self, x):
        return self.phi ** 2 * x * _phi1(2.0 * self.b * x)

    def _double_integral(self, T):
        return self.phi * T * T * _phi2(self.b * T)

    def as_expsum(self) -> "ExpSumKernel":
        return ExpSumKernel(((self.phi, self.b),))


@dataclass(frozen=True)
class PowerKernel(Kernel):
    """Rough kernel ``g(x) = phi * x**(-gamma)`` with ``0 < gamma < 1/2``."""

    phi: float
    gamma: float
    singular_at_zero: bool = field(default=True, init=False)

    def __post_init__(self):
        if not self.phi >= 0.0 or not np.isfinite(self.phi):
            raise ConfigurationError(f"phi must be non-negative, got {self.phi}")
        if not 0.0 < self.gamma < 0.5:
            raise ConfigurationError(f"gamma must lie in (0, 1/2), got {self.gamma}")

    @property
    def singular_exponent(self) -> float:
        return self.gamma

    @property
    def hurst(self) -> float:
        return 0.5 - self.gamma

    def _eval(self, x):
        return self.phi * x ** (-self.gamma)

    def _integral(self, x):
        return self.phi * x ** (1.0 - self.gamma) / (1.0 - self.gamma)

    def _sq_integral(self, x):
        return self.phi ** 2 * x ** (1.0 - 2.0 * self.gamma) / (1.0 - 2.0 * self.gamma)

    def _double_integral(self, T):
        g = self.gamma
        return self.phi * T ** (2.0 - g) / ((1.0 - g) * (2.0 - g))


@dataclass(frozen=True)
class ExpSumKernel(Kernel):
    """``g(x) = sum_k w_k exp(-r_k x)`` with non-negative rates."""

    terms: tuple
    weights: np.ndarray = field(init=False, repr=False, compare=False)
    rates: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        arr = np.asarray(self.terms, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) == 0:
            raise ConfigurationError("ExpSum needs a non-empty list of (weight, rate)")
        if np.any(arr[:, 1] < 0.0) or not np.all(np.isfinite(arr)):
            raise ConfigurationError("ExpSum rates must be finite and non-negative")
        object.__setattr__(self, "terms", tuple(map(tuple, arr.tolist())))
        object.__setattr__(self, "weights", arr[:, 0].copy())
        object.__setattr__(self, "rates", arr[:, 1].copy())

    @property
    def n_terms(self) -> int:
        return len(self.rates)

    def _eval(self, x):
        return np.tensordot(np.exp(-np.multiply.outer(x, self.rates)), self.weights, axes=1)

    def _integral(self, x):
        z = np.multiply.outer(x, self.rates)
        return np.tensordot(_phi1(z), self.weights, axes=1) * x

    def _sq_integral(self, x):
        rr = self.rates[:, None] + self.rates[None, :]
        ww = self.weights[:, None] * self.weights[None, :]
        z = np.multiply.outer(x, rr)
        return np.sum(_phi1(z) * ww, axis=(-2, -1)) * x

    def _double_integral(self, T):
        return float(np.sum(self.weights * _phi2(self.rates * T))) * T * T


@dataclass(frozen=True)
class TabulatedKernel(Kernel):
    """Kernel given on a grid; linear in between, constant outside."""

    grid: Sequence[float]
    values: Sequence[float]
    _x: np.ndarray = field(init=False, repr=False, compare=False)
    _y: np.ndarray = field(init=False, repr=False, compare=False)
    _prim: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x = np.asarray(self.grid, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or len(x) < 2:
            raise ConfigurationError("grid and values must be 1-d of equal length >= 2")
        if x[0] < 0.0 or np.any(np.diff(x) <= 0.0):
            raise ConfigurationError("grid must be non-negative and strictly increasing")
        if not np.all(np.isfinite(y)):
            raise ConfigurationError("tabulated values must be finite")
        object.__setattr__(self, "grid", tuple(x.tolist()))
        object.__setattr__(self, "values", tuple(y.tolist()))
        object.__setattr__(self, "_x", x)
        object.__setattr__(self, "_y", y)
        head = y[0] * x[0]
        prim = head + np.concatenate(([0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))))
        object.__setattr__(self, "_prim", prim)

    def _eval(self, x):
        return np.interp(x, self._x, self._y)

    def _integral(self, x):
        xs, ys, prim = self._x, self._y, self._prim
        x = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 1)
        gx = np.interp(x, xs, ys)
        inside = prim[i] + 0.5 * (ys[i] + gx) * (x - xs[i])
        out = np.where(x <= xs[0], ys[0] * x, inside)
        out = np.where(x >= xs[-1], prim[-1] + ys[-1] * (x - xs[-1]), out)
        return out

    def _sq_integral(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([self._quad(lambda s: self._eval(s) ** 2, xi) for xi in x.ravel()])
        return out.reshape(x.shape)

    def _double_integral(self, T):
        return self._quad(lambda s: (T - s) * self._eval(s), T)

    def _quad(self, f, upper):
        if upper == 0.0:
            return 0.0
        pts = [p for p in self._x if 0.0 < p < upper]
        val, _ = integrate.quad(f, 0.0, upper, points=pts or None, limit=max(200, 4 * len(pts)),
                                epsabs=0.0, epsrel=1e-12)
        return val


def eval_kernel(kernel: Kernel, x):
    return kernel(x)


def double_kernel_integral(kernel: Kernel, T: float) -> float:
    """``int_0^T int_0^{t1} g(t1 - t2) dt2 dt1``."""
    return kernel.double_integral(T)


def lift_rates(n: int, T: float) -> np.ndarray:
    """Geometric rate grid on ``[1/T, n^2/T]``."""
    if n == 1:
        return np.array([1.0 / T])
    return np.geomspace(1.0 / T, n * n / T, n)


def markovian_lift(kernel: Kernel, n: int, T: float = 1.0) -> Kernel:
    """Approximate a power kernel by an ``n``-term exponential sum.

    Rates sit on a geometric grid over ``[1/T, n^2/T]``; the weights solve the
    ``L^2([0, T])`` least-squares problem exactly (closed-form Gram matrix and
    incomplete-gamma right-hand side). Kernels that already are exponential
    sums are returned unchanged.

    Parameters
    ----------
    kernel : Kernel
        ``PowerKernel`` to approximate (or an exponential kernel, returned as is).
    n : int
        Number of exponential terms, at least 1.
    T : float
        Horizon of the ``L^2`` fit.
    """
    if int(n) != n or n < 1:
        raise DomainError(f"lift size must be a positive integer, got {n}")
    if isinstance(kernel, (ExponentialKernel, ExpSumKernel)):
        return kernel
    if not isinstance(kernel, PowerKernel):
        raise ConfigurationError("markovian_lift needs a power kernel")
    if not T > 0.0:
        raise DomainError("lift horizon must be positive")
    g, phi = kernel.gamma, kernel.phi
    r = lift_rates(int(n), T)
    rr = r[:, None] + r[None, :]
    gram = T * _phi1(rr * T)
    rhs = phi * r ** (g - 1.0) * special.gamma(1.0 - g) * special.gammainc(1.0 - g, r * T)
    # symmetric eigen-solve with a relative cutoff; the Gram matrix of
    # exponentials is badly conditioned for large n
    lam, vec = np.linalg.eigh(gram)
    keep = lam > lam[-1] * 1e-13
    w = vec[:, keep] @ ((vec[:, keep].T @ rhs) / lam[keep])
    return ExpSumKernel(tuple(zip(w.tolist(), r.tolist())))


def l2_error(approx: Kernel, target: Kernel, T: float) -> float:
    """``||approx - target||_{L^2([0, T])}`` by substituted Gauss-Legendre quadrature."""
    from .quadrature import singular_nodes

    q = 1.0 / (1.0 - 2.0 * max(approx.singular_exponent, target.singular_exponent))
    x, w = singular_nodes(0.0, T, 400, q)
    diff = approx(x) - target(x)
    return float(np.sqrt(np.sum(w * diff * diff)))
