"""Initial forward-variance curves.

A curve ``u`` maps time-to-maturity to annualized forward variance. Along the
deterministic (zero vol-of-vol) flow the curve is only shifted, so evaluating
``u(t + x)`` is all the machinery ever needs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, DomainError


class Curve:
    """Base class; subclasses implement ``_eval`` and ``_integral``."""

    t_max: float = np.inf

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or np.any(t > self.t_max) or np.any(np.isnan(t)):
            raise DomainError(f"curve evaluated outside [0, {self.t_max}]")
        out = self._eval(t)
        return out if out.ndim else float(out)

    def shifted(self, t: float) -> Callable:
        """Return ``x -> u(t + x)``, the zeroth-order forward curve at time ``t``."""
        return lambda x: self(t + np.asarray(x, dtype=float))

    def integral(self, a: float, b: float) -> float:
        """Integral of the curve over ``[a, b]``."""
        if a < 0.0 or b > self.t_max or b < a:
            raise DomainError(f"cannot integrate curve over [{a}, {b}]")
        return float(self._integral(float(a), float(b)))

    def cell_averages(self, times: np.ndarray) -> np.ndarray:
        """Average value of the curve on each cell of a time grid."""
        times = np.asarray(times, dtype=float)
        return np.array(
            [self.integral(a, b) / (b - a) for a, b in zip(times[:-1], times[1:])]
        )

    @property
    def is_flat(self) -> bool:
        return False

    def _eval(self, t: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def _integral(self, a: float, b: float) -> float:
        val, _ = integrate.quad(lambda s: float(self._eval(np.asarray(s))), a, b, limit=200)
        return val


@dataclass(frozen=True)
class FlatCurve(Curve):
    level: float
    t_max: float = np.inf

    def __post_init__(self):
        if not (self.level > 0.0 and np.isfinite(self.level)):
            raise ConfigurationError(f"flat curve level must be positive, got {self.level}")

    def _eval(self, t):
        return np.full_like(t, self.level, dtype=float)

    def _integral(self, a, b):
        return self.level * (b - a)

    @property
    def is_flat(self) -> bool:
        return True


@dataclass(frozen=True)
class PiecewiseLinearCurve(Curve):
    """Linear interpolation between knots, constant beyond the last knot."""

    knots: Sequence[tuple[float, float]]
    t_max: float = np.inf
    _t: np.ndarray = field(init=False, repr=False, compare=False)
    _v: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        arr = np.asarray(self.knots, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 1:
            raise ConfigurationError("knots must be a non-empty list of (time, variance)")
        t, v = arr[:, 0], arr[:, 1]
        if t[0] != 0.0:
            raise ConfigurationError("first knot must sit at t=0")
        if np.any(np.diff(t) <= 0.0):
            raise ConfigurationError("knot times must be strictly increasing")
        if np.any(v <= 0.0) or not np.all(np.isfinite(v)):
            raise ConfigurationError("knot variances must be positive and finite")
        object.__setattr__(self, "_t", t)
        object.__setattr__(self, "_v", v)

    def _eval(self, t):
        return np.interp(t, self._t, self._v)

    def _primitive(self, x: float) -> float:
        t, v = self._t, self._v
        if x >= t[-1]:
            seg = np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(t))
            return float(seg + v[-1] * (x - t[-1]))
        i = int(np.searchsorted(t, x, side="right")) - 1
        full = np.sum(0.5 * (v[1 : i + 1] + v[:i]) * np.diff(t[: i + 1]))
        vx = np.interp(x, t, v)
        return float(full + 0.5 * (v[i] + vx) * (x - t[i]))

    def _integral(self, a, b):
        return self._primitive(b) - self._primitive(a)

    @property
    def is_flat(self) -> bool:
        return bool(np.all(self._v == self._v[0]))


class AnalyticCurve(Curve):
    """Curve given by a vectorized callback; positivity is spot-checked on a grid."""

    def __init__(self, func: Callable[[np.ndarray], np.ndarray], t_max: float):
        if not np.isfinite(t_max) or t_max <= 0.0:
            raise ConfigurationError("analytic curves need a finite positive t_max")
        self.func = func
        self.t_max = float(t_max)
        probe = np.asarray(func(np.linspace(0.0, self.t_max, 1001)), dtype=float)
        if probe.shape != (1001,) or np.any(probe <= 0.0) or not np.all(np.isfinite(probe)):
            raise ConfigurationError("analytic curve must be vectorized, finite and positive")

    def _eval(self, t):
        return np.asarray(self.func(t), dtype=float).reshape(t.shape)

    def __repr__(self):
        return f"AnalyticCurve(func={self.func!r}, t_max={self.t_max})"


def eval_curve(curve: Curve, t):
    return curve(t)
