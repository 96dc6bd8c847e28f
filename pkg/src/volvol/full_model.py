"""Brute-force Monte Carlo of the full vol-of-vol model.

Spot variance:

* affine class -- left-point Volterra-Euler on
  ``v_t = u(t) + eps int g(t-s) sigma(v_s^+) dW1_s`` with kernel cell averages
  (an exact recursion for exponential sums, a dense history sum otherwise);
* Bergomi class -- the lognormal solution ``v_t = u(t) exp(eps G_t - eps^2 V_t/2)``
  with ``G`` sampled exactly (see :mod:`volvol.gaussian`).

Prices are computed by conditioning on the variance driver: given ``W1``,
``X_T`` is Gaussian with mean ``x - I/2 + rho M`` and variance
``(1 - rho^2) I`` where ``I = sum v_j dt`` and ``M = sum sqrt(v_j) dW1_j``.
The same left-point sums define the plain Euler log-price, so both
estimators target the same discrete model.

Normals are laid out exactly as in :mod:`volvol.mc_engine` (column 0 drives
``W1``, column 1 drives ``W2``), so both engines see the same Brownian
increments for a given seed and chunking.
"""
from __future__ import annotations

import numpy as np

from .bs_engine import BaseLaw, Payoff, base_price, log_spot_derivatives
from .errors import ConfigurationError, DomainError
from .gaussian import DENSE_LIMIT, VolterraGaussian, _as_expsum
from .kernels import _phi1
from .mc_engine import MCEstimate, PathGrid
from .models import ModelSpec
from .rng import DEFAULT_CHUNK, Moments, normals, pair_units, reduce_moments, run_chunks


class _SpotSimulator:
    def __init__(self, model: ModelSpec, grid: PathGrid, method: str = "auto",
                 scheme: str = "exact"):
        if grid.T > model.curve.t_max:
            raise DomainError("grid extends beyond the curve range")
        if scheme not in ("exact", "euler"):
            raise ConfigurationError(f"unknown spot scheme {scheme!r}")
        self.model, self.grid, self.scheme = model, grid, scheme
        t = grid.times
        self.u = model.curve(t)
        N = grid.n_steps
        es = _as_expsum(model.kernel)
        if model.is_affine:
            self.sampler = None
            self.kbar = None
            self.expsum = es if method in ("auto", "recursive") else None
            if self.expsum is None:
                self.kbar = model.kernel.cell_average_matrix(t)[1:]
            # keep the normal layout of the derivative engine
            if method in ("auto", "recursive") and es is not None:
                self.n_extra = es.n_terms
            elif method == "euler" or (method == "auto" and N > DENSE_LIMIT):
                self.n_extra = 0
            else:
                self.n_extra = 1
        else:
            self.sampler = VolterraGaussian(model.kernel, t, None, method=method)
            self.n_extra = self.sampler.n_extra
            if scheme == "euler":
                tt = t[-1] - t[:-1]
                self.g_left = model.kernel(tt)

    def draw(self, gen, n, antithetic):
        return normals(gen, n, (self.grid.n_steps, 2 + self.n_extra), antithetic)

    def spot(self, gen, n, eps, antithetic=True):
        z = self.draw(gen, n, antithetic)
        return self.spot_from(z, eps) + (z,)

    def prepare(self, z):
        """Eps-independent part of a chunk: ``(dW1, G)``."""
        if self.sampler is not None:
            return self.sampler.sample(z[:, :, 0], z[:, :, 2:])
        return z[:, :, 0] * np.sqrt(self.grid.dt), None

    def spot_from(self, z, eps, prepared=None):
        """Spot variance paths ``(n, N+1)`` and ``dW1`` for given normals."""
        dW1, G = self.prepare(z) if prepared is None else prepared
        if eps == 0.0:
            return np.broadcast_to(self.u, (len(z), len(self.u))).copy(), dW1
        if not self.model.is_affine:
            if self.scheme == "euler":
                raise ConfigurationError("the Euler Bergomi scheme only returns terminal values")
            V = self.sampler.variance
            return self.u * np.exp(eps * G - 0.5 * eps * eps * V), dW1
        return self._affine(dW1, eps), dW1

    def _affine(self, dW1, eps):
        n, N = dW1.shape
        sig = self.model.sigma_tilde
        v = np.empty((n, N + 1))
        v[:, 0] = self.u[0]
        if self.expsum is not None:
            r, w = self.expsum.rates, self.expsum.weights
            dt = self.grid.dt
            decay, gain = np.exp(-r * dt), _phi1(r * dt)
            S = np.zeros((n, len(r)))
            for j in range(N):
                a = sig(np.maximum(v[:, j], 0.0)) * dW1[:, j]
                S = S * decay + a[:, None] * gain
                v[:, j + 1] = self.u[j + 1] + eps * (S @ w)
            return v
        a = np.empty((n, N))
        kb = self._kbar_full()
        for j in range(N):
            a[:, j] = sig(np.maximum(v[:, j], 0.0)) * dW1[:, j]
            v[:, j + 1] = self.u[j + 1] + eps * (a[:, : j + 1] @ kb[j, : j + 1])
        return v

    def first_order(self, prepared):
        """Pathwise eps-derivative of the scheme variance at eps = 0, left points ``(n, N)``."""
        dW1, G = prepared
        if not self.model.is_affine:
            return self.u[:-1] * G[:, :-1]
        sig = self.model.sigma_tilde(np.maximum(self.u[:-1], 0.0))
        out = np.zeros_like(dW1)
        out[:, 1:] = (dW1 * sig) @ self._kbar_full()[:-1].T
        return out

    def first_order_cov(self) -> np.ndarray:
        """``Cov(sum_k sqrt(u_k) dW1_k, v1_j)`` for the left points ``j = 0..N-1``."""
        dt = self.grid.dt
        su = np.sqrt(np.maximum(self.u[:-1], 0.0))
        out = np.zeros(self.grid.n_steps)
        if not self.model.is_affine:
            reg = self.sampler.regression_matrix()[:-1]
            out[1:] = self.u[1:-1] * dt * (reg @ su)
        else:
            sig = self.model.sigma_tilde(np.maximum(self.u[:-1], 0.0))
            out[1:] = dt * (self._kbar_full()[:-1] @ (sig * su))
        return out

    def _kbar_full(self):
        if self.kbar is None:
            self.kbar = self.model.kernel.cell_average_matrix(self.grid.times)[1:]
        return self.kbar

    def bergomi_euler_terminal(self, z, eps):
        """Terminal spot variance from the multiplicative Euler scheme on the forward curve."""
        dW1 = z[:, :, 0] * np.sqrt(self.grid.dt)
        return self.u[-1] * np.prod(1.0 + eps * self.g_left[None, :] * dW1, axis=1)


def simulate_spot_variance(model: ModelSpec, eps: float, grid: PathGrid, seed: int,
                           n_paths: int = 1, antithetic: bool = False,
                           chunk_size: int = DEFAULT_CHUNK, threads: int | None = None,
                           method: str = "auto") -> np.ndarray:
    """Spot-variance paths ``v_t = u_t^eps(0)`` on the grid, shape ``(n_paths, N+1)``."""
    if abs(eps) > 1.0:
        raise DomainError("vol-of-vol must satisfy |eps| <= 1")
    sim = _SpotSimulator(model, grid, method)
    parts = run_chunks(lambda gen, n, c: sim.spot(gen, n, eps, antithetic)[0],
                       n_paths, seed, chunk_size, threads, antithetic)
    return np.concatenate(parts)


def _conditional_values(model, payoff, v, dW1, dt, x0):
    rho = model.rho
    I = v[:, :-1].sum(axis=1) * dt
    M = np.einsum("ij,ij->i", np.sqrt(np.maximum(v[:, :-1], 0.0)), dW1)
    return payoff.gaussian_expectation(x0 - 0.5 * I + rho * M, (1.0 - rho * rho) * I)


def _payoff_values(sim, model, payoff, v, dW1, z, x0, estimator):
    dt = sim.grid.dt
    rho = model.rho
    I = v[:, :-1].sum(axis=1) * dt
    sv = np.sqrt(np.maximum(v[:, :-1], 0.0))
    M = np.einsum("ij,ij->i", sv, dW1)
    if estimator == "conditional":
        return payoff.gaussian_expectation(x0 - 0.5 * I + rho * M, (1.0 - rho * rho) * I)
    dW2 = z[:, :, 1] * np.sqrt(dt)
    X = x0 - 0.5 * I + rho * M + np.sqrt(max(0.0, 1.0 - rho * rho)) * np.einsum("ij,ij->i", sv, dW2)
    return payoff(X)


def _first_order_values(model, payoff, u, dt, v1, dW1, x0):
    """Pathwise eps-derivative at 0 of the conditional payoff (``u`` at left points)."""
    rho = model.rho
    I0 = float(np.sum(u) * dt)
    M0 = dW1 @ np.sqrt(u)
    dI = v1.sum(axis=1) * dt
    dM = np.einsum("ij,ij->i", v1 / (2.0 * np.sqrt(u)), dW1)
    _, fm, fmm = payoff.mean_derivatives(x0 - 0.5 * I0 + rho * M0,
                                         np.full(len(M0), (1.0 - rho * rho) * I0), 2)
    return fm * (-0.5 * dI + rho * dM) + 0.5 * fmm * (1.0 - rho * rho) * dI


class _Level:
    """One discretisation level driven by the normals of the finest grid.

    ``stride = 2`` gives the half-resolution scheme built from summed
    increments: the exact Bergomi factor is subsampled, the affine Euler
    recursion is rerun on the coarse grid.
    """

    def __init__(self, fine: _SpotSimulator, stride: int = 1):
        self.fine, self.stride = fine, stride
        if stride == 1:
            self.sim = fine
        else:
            grid = PathGrid(fine.grid.T, fine.grid.n_steps // stride)
            self.sim = _SpotSimulator.__new__(_SpotSimulator)
            self.sim.model, self.sim.grid, self.sim.scheme = fine.model, grid, "exact"
            self.sim.u = fine.u[::stride]
            self.sim.sampler, self.sim.kbar = None, None
            es = _as_expsum(fine.model.kernel)
            self.sim.expsum = es if fine.model.is_affine and fine.expsum is not None else None
        self.dt = self.sim.grid.dt
        self.u = self.sim.u

    def _split(self, prep):
        dW1, G = prep
        if self.stride == 1:
            return dW1, G
        dW1 = dW1.reshape(len(dW1), -1, self.stride).sum(axis=2)
        return dW1, (None if G is None else G[:, ::self.stride])

    def spot(self, prep, eps):
        dW1, G = self._split(prep)
        if eps == 0.0:
            return np.broadcast_to(self.u, (len(dW1), len(self.u))).copy(), dW1
        if self.fine.model.is_affine:
            return self.sim._affine(dW1, eps), dW1
        V = self.fine.sampler.variance[::self.stride]
        return self.u * np.exp(eps * G - 0.5 * eps * eps * V), dW1

    def first_order(self, prep):
        dW1, G = self._split(prep)
        if self.fine.model.is_affine:
            return self.sim.first_order((dW1, None)), dW1
        return self.u[:-1] * G[:, :-1], dW1

    def first_order_cov(self) -> np.ndarray:
        if self.fine.model.is_affine or self.stride == 1:
            return self.sim.first_order_cov()
        f = self.fine
        reg = f.sampler.regression_matrix()
        n = f.grid.n_steps
        # rows: coarse points t_i (fine row stride*i - 1); columns: coarse cells, per unit time
        reg = reg[self.stride - 1::self.stride].reshape(n // self.stride, -1, self.stride).mean(axis=2)
        su = np.sqrt(np.maximum(self.u[:-1], 0.0))
        out = np.zeros(len(self.u) - 1)
        out[1:] = self.u[1:-1] * self.dt * (reg[:-1] @ su)
        return out

    def shift(self, payoff, x0, eps_values, cv):
        I0 = float(np.sum(self.u[:-1]) * self.dt)
        law = BaseLaw(x0, I0, self.fine.grid.T)
        out = np.full(len(eps_values), base_price(law, payoff))
        if cv == "first_order":
            F = log_spot_derivatives(law, payoff, 3)
            kappa = float(np.sum(self.first_order_cov()) * self.dt)
            out += np.asarray(eps_values) * 0.5 * self.fine.model.rho * kappa * (F[3] - F[2])
        return out


_CV_KINDS = {False: "none", None: "none", True: "base", "none": "none", "base": "base",
             "first_order": "first_order", "auto": "auto"}


def _resolve_cv(model, grid, estimator):
    # the zero vol-of-vol variate adds noise once eps reaches ~0.5 under
    # antithetic sampling; the first-order one never did in our measurements
    ok = (estimator == "conditional" and abs(model.rho) < 1.0
          and np.all(model.curve(grid.times) > 0.0))
    return "first_order" if ok else "base"


def mc_price_sweep(model: ModelSpec, eps_values, payoff: Payoff, grid: PathGrid, n_paths: int,
                   seed: int, x0: float = 0.0, estimator: str = "conditional",
                   antithetic: bool = True, control_variate=False, richardson: bool = False,
                   chunk_size: int = DEFAULT_CHUNK, threads: int | None = None,
                   method: str = "auto") -> list:
    """Prices ``E[f(X_T^eps)]`` for several ``eps`` on common random numbers.

    Parameters
    ----------
    control_variate : bool or {"none", "base", "first_order", "auto"}
        ``"base"`` (or ``True``) estimates ``E0 + mean(f(X^eps) - f(X^0))``
        where ``E0`` is the exact expectation of the zero vol-of-vol scheme.
        ``"first_order"`` also subtracts ``eps`` times the pathwise
        eps-derivative of the conditional payoff at 0 and adds back its exact
        expectation under the discrete scheme, so the noise left is
        ``O(eps^2)``. It needs the conditional estimator and ``|rho| < 1``.
        ``"auto"`` picks ``"first_order"`` when allowed, ``"base"`` otherwise.
    richardson : bool
        Return ``2 P_N - P_{N/2}`` path by path, where ``P_{N/2}`` reuses the
        same Brownian path on every other grid point. This removes the
        first-order time-discretisation bias. Needs an even step count and
        the conditional estimator.
    """
    eps_values = [float(e) for e in eps_values]
    if any(abs(e) > 1.0 for e in eps_values):
        raise DomainError("vol-of-vol must satisfy |eps| <= 1")
    if estimator not in ("conditional", "euler"):
        raise ConfigurationError(f"unknown estimator {estimator!r}")
    cv = _CV_KINDS.get(control_variate)
    if cv is None:
        raise ConfigurationError(f"unknown control variate {control_variate!r}")
    if cv == "auto":
        cv = _resolve_cv(model, grid, estimator)
    if cv == "first_order" and (estimator != "conditional" or abs(model.rho) >= 1.0):
        raise ConfigurationError("the first-order control variate needs the conditional "
                                 "estimator and |rho| < 1")
    if cv == "first_order" and np.any(model.curve(grid.times) <= 0.0):
        raise DomainError("the first-order control variate needs a positive forward curve")
    if richardson and (estimator != "conditional" or grid.n_steps % 2):
        raise ConfigurationError("Richardson extrapolation needs the conditional estimator "
                                 "and an even number of steps")
    sim = _SpotSimulator(model, grid, method)
    levels = [(_Level(sim, 1), 1.0)]
    if richardson:
        levels = [(_Level(sim, 1), 2.0), (_Level(sim, 2), -1.0)]
    k = len(eps_values)

    def values(lev, prep, z, eps):
        v, dW1 = lev.spot(prep, eps)
        if estimator == "euler":
            return _payoff_values(sim, model, payoff, v, dW1, z, x0, estimator)
        return _conditional_values(model, payoff, v, dW1, lev.dt, x0)

    def work(gen, n, c):
        z = sim.draw(gen, n, antithetic)
        prep = sim.prepare(z)
        cols = np.zeros((n, k))
        for lev, wt in levels:
            base = d1 = None
            if cv != "none":
                base = values(lev, prep, z, 0.0)
            if cv == "first_order":
                v1, dW1 = lev.first_order(prep)
                d1 = _first_order_values(model, payoff, lev.u[:-1], lev.dt, v1, dW1, x0)
            for j, e in enumerate(eps_values):
                val = values(lev, prep, z, e)
                if base is not None:
                    val = val - base
                if d1 is not None:
                    val = val - e * d1
                cols[:, j] += wt * val
        return Moments.from_samples(pair_units(cols, antithetic))

    m = reduce_moments(run_chunks(work, n_paths, seed, chunk_size, threads, antithetic))
    shift = np.zeros(k)
    if cv != "none":
        for lev, wt in levels:
            shift += wt * lev.shift(payoff, x0, eps_values, cv)
    return [MCEstimate(float(m.mean[j] + shift[j]), float(m.stderr[j]), n_paths, seed,
                       antithetic, chunk_size) for j in range(k)]


def mc_price(model: ModelSpec, eps: float, payoff: Payoff, grid: PathGrid, n_paths: int,
             seed: int, **kwargs) -> MCEstimate:
    """Monte Carlo price ``E[f(X_T^eps)]`` (undiscounted, spot ``e^x0``)."""
    return mc_price_sweep(model, [eps], payoff, grid, n_paths, seed, **kwargs)[0]
