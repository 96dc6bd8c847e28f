"""Scikit-learn style wrappers around the functional pricing core.

The estimators only hold configuration in ``__init__`` and store computed
state in trailing-underscore attributes, so ``get_params``/``set_params``
and ``sklearn.base.clone`` work as usual. The "input" of ``predict`` is the
vol-of-vol (pricers) or the maturity (skew term structure).
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .bs_engine import Payoff
from .coefficients import DEFAULT_NODES, atm_skew
from .errors import ConfigurationError
from .expansion import expand_price
from .full_model import mc_price_sweep
from .mc_engine import PathGrid
from .models import ModelSpec


def _eps_array(eps):
    eps = np.asarray(eps, dtype=float)
    if eps.ndim == 2:
        if eps.shape[1] != 1:
            raise ConfigurationError("expected a single feature column of eps values")
        eps = eps[:, 0]
    return np.atleast_1d(eps)


class ExpansionPricer(BaseEstimator):
    """Vol-of-vol expansion price as a function of ``eps``.

    ``fit`` computes the coefficients once; ``predict`` assembles prices for
    any set of ``eps`` values without recomputation.

    Parameters
    ----------
    model : ModelSpec
    payoff : Payoff
    maturity : float
    order : int
        Expansion order ``p`` (quadrature supports ``p <= 2``).
    mode : {"quadrature", "mc"}
    n_paths, seed, n_steps : Monte Carlo settings for ``mode="mc"``.
    """

    def __init__(self, model: ModelSpec | None = None, payoff: Payoff | None = None,
                 maturity: float = 1.0, order: int = 2, mode: str = "quadrature",
                 n_paths: int = 2 ** 16, seed: int = 0, n_steps: int = 256,
                 log_spot: float = 0.0, nodes: int = DEFAULT_NODES, threads=None):
        self.model = model
        self.payoff = payoff
        self.maturity = maturity
        self.order = order
        self.mode = mode
        self.n_paths = n_paths
        self.seed = seed
        self.n_steps = n_steps
        self.log_spot = log_spot
        self.nodes = nodes
        self.threads = threads

    def fit(self, X=None, y=None):
        if self.model is None or self.payoff is None:
            raise ConfigurationError("ExpansionPricer needs a model and a payoff")
        self.result_ = expand_price(self.model, self.payoff, self.maturity, [], self.order,
                                    mode=self.mode, n_paths=self.n_paths, seed=self.seed,
                                    n_steps=self.n_steps, x0=self.log_spot,
                                    threads=self.threads, nodes=self.nodes)
        self.base_price_ = self.result_.base_price
        self.f_weights_ = {k: v[0] for k, v in self.result_.f_weights.items()}
        return self

    def predict(self, X, return_std: bool = False):
        """Expansion prices at the ``eps`` values in ``X``."""
        check_is_fitted(self, "result_")
        out = [self.result_.price(e) for e in _eps_array(X)]
        mean = np.array([o[0] for o in out])
        if return_std:
            return mean, np.array([o[1] for o in out])
        return mean


class MonteCarloPricer(BaseEstimator):
    """Full-model Monte Carlo price on common random numbers.

    ``fit`` only validates the configuration; every ``predict`` call reruns
    the simulation with the same seed, so repeated ``eps`` values give
    identical prices.
    """

    def __init__(self, model: ModelSpec | None = None, payoff: Payoff | None = None,
                 maturity: float = 1.0, n_paths: int = 2 ** 16, seed: int = 0,
                 n_steps: int = 512, log_spot: float = 0.0, control_variate="auto",
                 antithetic: bool = True, threads=None):
        self.model = model
        self.payoff = payoff
        self.maturity = maturity
        self.n_paths = n_paths
        self.seed = seed
        self.n_steps = n_steps
        self.log_spot = log_spot
        self.control_variate = control_variate
        self.antithetic = antithetic
        self.threads = threads

    def fit(self, X=None, y=None):
        if self.model is None or self.payoff is None:
            raise ConfigurationError("MonteCarloPricer needs a model and a payoff")
        self.grid_ = PathGrid(self.maturity, self.n_steps)
        return self

    def predict(self, X, return_std: bool = False):
        check_is_fitted(self, "grid_")
        est = mc_price_sweep(self.model, _eps_array(X), self.payoff, self.grid_, self.n_paths,
                             self.seed, x0=self.log_spot, antithetic=self.antithetic,
                             control_variate=self.control_variate, threads=self.threads)
        mean = np.array([e.mean for e in est])
        if return_std:
            return mean, np.array([e.stderr for e in est])
        return mean


class SkewTermStructure(BaseEstimator):
    """Power-law fit ``psi(T) ~ a T^b`` of the ATM skew over a maturity grid.

    Parameters
    ----------
    model : ModelSpec
        Must carry the flat unit curve.
    method : {"quadrature", "closed"}
    """

    def __init__(self, model: ModelSpec | None = None, method: str = "quadrature",
                 nodes: int = DEFAULT_NODES):
        self.model = model
        self.method = method
        self.nodes = nodes

    def fit(self, X, y=None):
        if self.model is None:
            raise ConfigurationError("SkewTermStructure needs a model")
        T = _eps_array(X)
        if len(T) < 2 or np.any(T <= 0.0):
            raise ConfigurationError("need at least two positive maturities")
        self.maturities_ = T
        self.skew_ = np.array([atm_skew(self.model, t, method=self.method, n=self.nodes)
                               for t in T])
        if np.any(self.skew_ <= 0.0):
            raise ConfigurationError("skew vanishes (rho = 0?), no power law to fit")
        slope, icpt = np.polyfit(np.log(T), np.log(self.skew_), 1)
        self.exponent_ = float(slope)
        self.prefactor_ = float(np.exp(icpt))
        return self

    def predict(self, X):
        check_is_fitted(self, "exponent_")
        return self.prefactor_ * _eps_array(X) ** self.exponent_
