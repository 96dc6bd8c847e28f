"""Model specifications: affine-drift volatility functions and the Bergomi class."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .curves import Curve
from .errors import ConfigurationError, UnsupportedOrderError
from .kernels import Kernel

AFFINE = "affine"
BERGOMI = "bergomi"


def sqrt_derivative(k: int, x):
    """``d^k/dx^k sqrt(x)``."""
    c = 1.0
    for j in range(k):
        c *= 0.5 - j
    return c * np.asarray(x, dtype=float) ** (0.5 - k)


class SigmaTilde:
    """Volatility function of the affine-drift class and its derivatives.

    Parameters
    ----------
    kind : {"sqrt", "linear", "callback"}
    func : callable, optional
        ``sigma(x)`` for the callback kind.
    derivatives : sequence of callables, optional
        ``[sigma', sigma'', ...]`` for the callback kind. Orders that are not
        supplied raise ``ConfigurationError`` when requested.
    """

    def __init__(self, kind: str = "sqrt", func: Callable | None = None,
                 derivatives: Sequence[Callable] = ()):
        if kind not in ("sqrt", "linear", "callback"):
            raise ConfigurationError(f"unknown sigma_tilde kind {kind!r}")
        if kind == "callback" and func is None:
            raise ConfigurationError("callback sigma_tilde needs func")
        self.kind = kind
        self.func = func
        self.derivatives = tuple(derivatives)

    def __call__(self, x):
        return self.deriv(0, x)

    def deriv(self, k: int, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "sqrt":
            return sqrt_derivative(k, np.maximum(x, 0.0)) if k == 0 else sqrt_derivative(k, x)
        if self.kind == "linear":
            return x.copy() if k == 0 else (np.ones_like(x) if k == 1 else np.zeros_like(x))
        if k == 0:
            return np.asarray(self.func(x), dtype=float)
        if k > len(self.derivatives):
            raise ConfigurationError(
                f"sigma_tilde callback lacks derivative of order {k}")
        return np.asarray(self.derivatives[k - 1](x), dtype=float)

    def __repr__(self):
        return f"SigmaTilde({self.kind!r})"

    def __eq__(self, other):
        return (isinstance(other, SigmaTilde) and self.kind == other.kind
                and self.func is other.func and self.derivatives == other.derivatives)

    def __hash__(self):
        return hash((self.kind, id(self.func)))


@dataclass(frozen=True)
class ModelSpec:
    """Forward-variance model: class, kernel, initial curve and spot-vol correlation.

    ``model_class`` is ``"affine"`` (spot variance solves a Volterra equation
    driven by ``sigma_tilde``) or ``"bergomi"`` (volatility field ``u * g``).
    """

    model_class: str
    kernel: Kernel
    curve: Curve
    rho: float
    sigma_tilde: SigmaTilde | None = field(default=None)

    def __post_init__(self):
        if self.model_class not in (AFFINE, BERGOMI):
            raise ConfigurationError(f"unknown model class {self.model_class!r}")
        if not -1.0 <= self.rho <= 1.0:
            raise ConfigurationError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.model_class == AFFINE and self.sigma_tilde is None:
            object.__setattr__(self, "sigma_tilde", SigmaTilde("sqrt"))
        if self.model_class == BERGOMI and self.sigma_tilde is not None:
            raise ConfigurationError("the Bergomi class takes no sigma_tilde")

    @classmethod
    def affine(cls, kernel, curve, rho, sigma_tilde="sqrt"):
        st = sigma_tilde if isinstance(sigma_tilde, SigmaTilde) else SigmaTilde(sigma_tilde)
        return cls(AFFINE, kernel, curve, rho, st)

    @classmethod
    def bergomi(cls, kernel, curve, rho):
        return cls(BERGOMI, kernel, curve, rho)

    @property
    def is_affine(self) -> bool:
        return self.model_class == AFFINE

    def with_rho(self, rho: float) -> "ModelSpec":
        return ModelSpec(self.model_class, self.kernel, self.curve, rho, self.sigma_tilde)

    def with_kernel(self, kernel: Kernel) -> "ModelSpec":
        return ModelSpec(self.model_class, kernel, self.curve, self.rho, self.sigma_tilde)

    def sigma_at_one(self) -> float:
        """``sigma(1)``: ``sigma_tilde(1)`` for the affine class, 1 for Bergomi."""
        return float(self.sigma_tilde(1.0)) if self.is_affine else 1.0

    def field(self, t, y):
        """Volatility field along the deterministic flow, ``Sigma(u_t^0)(y)``.

        Broadcasts over ``t`` and ``y``; no singularity check (callers keep
        ``y > 0`` for singular kernels).
        """
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        g = self.kernel._eval(y)
        if self.is_affine:
            return self.sigma_tilde(self.curve(t)) * g
        return self.curve(t + y) * g


def sigma0_field(model: ModelSpec, t, x):
    """``Sigma(u_t^0)(x)``; raises ``SingularityError`` at ``x = 0`` for rough kernels."""
    model.kernel(x)  # domain and singularity checks
    out = model.field(t, x)
    return out if np.ndim(out) else float(out)


def check_order(p: int, cap: int = 4):
    if p < 1:
        raise ConfigurationError("expansion order must be at least 1")
    if p > cap:
        raise UnsupportedOrderError(f"order {p} exceeds the supported maximum {cap}")
