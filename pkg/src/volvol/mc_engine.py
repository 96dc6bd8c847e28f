"""Monte Carlo for the vol-of-vol derivative processes at zero vol-of-vol.

At ``eps = 0`` the spot variance is the deterministic ``u(t)``. Its
eps-derivatives ``v^(m)`` are iterated stochastic integrals against the
variance driver ``W1``:

* affine class: ``v^(m)_t = m int g(t-s) D^{m-1}_s dW1_s`` with
  ``D^{m-1} = sum_k sigma^(k)(u) B_{m-1,k}(v^(1), ...)`` (``D^0 = sigma(u)``);
* Bergomi class: ``v_t = u(t) exp(eps G_t - eps^2 V_t / 2)``, hence
  ``v^(m)_t = u(t) m! H_m(G_t, V_t)`` exactly.

The log-price derivatives are ``X^(m)_T = int sqrt(U)^(m) dW - 1/2 int v^(m) dt``
with ``sqrt(U)^(m) = sum_k (d^k sqrt)(u) B_{m,k}(v^(1), ...)``. Stochastic
integrals use left points, ``dt`` integrals the trapezoid rule and the base
martingale ``Y`` uses cell-averaged ``u`` so that ``Var Y_T = Sigma_T`` exactly.
Every simulated quantity is then a polynomial of known degree in the
Gaussian noise, so chaos-orthogonality identities hold exactly per scheme.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Dict, Iterable, Sequence

import numpy as np

from .bs_engine import total_variance
from .errors import ConfigurationError, DomainError, UnsupportedOrderError
from .gaussian import VolterraGaussian
from .models import ModelSpec, sqrt_derivative
from .polynomials import bell, hermite, hermite_all
from .rng import DEFAULT_CHUNK, Moments, normals, pair_units, reduce_moments, run_chunks

MAX_ORDER = 4


@dataclass(frozen=True)
class PathGrid:
    """Uniform time grid ``0 = t_0 < ... < t_N = T``."""

    T: float
    n_steps: int

    def __post_init__(self):
        if not self.T > 0.0:
            raise ConfigurationError("grid horizon must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise ConfigurationError("n_steps must be an integer >= 2")

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_steps + 1)

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n_steps + 1, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_paths: int
    seed: int
    antithetic: bool
    chunk_size: int = DEFAULT_CHUNK

    def __float__(self):
        return float(self.mean)

    def zscore(self, target: float) -> float:
        if self.stderr == 0.0:
            return 0.0 if self.mean == target else np.inf
        return (self.mean - target) / self.stderr


@dataclass
class MCEstimateSet:
    """Jointly estimated quantities with their sample covariance."""

    labels: list
    moments: Moments
    n_paths: int
    seed: int
    antithetic: bool
    chunk_size: int

    def __getitem__(self, label) -> MCEstimate:
        return self.combine({label: 1.0})

    def combine(self, weights: Dict) -> MCEstimate:
        """Estimate of ``sum_label w * E[label]`` with correlation-aware stderr."""
        vec = np.zeros(len(self.labels))
        for lab, w in weights.items():
            vec[self.labels.index(lab)] += w
        mean = float(vec @ self.moments.mean)
        var = float(vec @ self.moments.cov @ vec) / self.moments.n
        return MCEstimate(mean, float(np.sqrt(max(var, 0.0))), self.n_paths, self.seed,
                          self.antithetic, self.chunk_size)

    @property
    def means(self) -> dict:
        return dict(zip(self.labels, self.moments.mean.tolist()))


@dataclass
class DerivativePathState:
    """Terminal values of one chunk of derivative paths.

    ``x[m-1]`` holds ``X^(m)_T``; ``v`` holds full ``v^(m)`` paths when
    requested.
    """

    Y: np.ndarray
    x: list
    sigma_T: float
    v: list = field(default_factory=list)
    dW1: np.ndarray | None = None
    dW2: np.ndarray | None = None


class _Simulator:
    """Precomputed, immutable pieces shared by all chunks."""

    def __init__(self, model: ModelSpec, grid: PathGrid, p: int, method: str = "auto"):
        if p < 1 or p > MAX_ORDER:
            raise UnsupportedOrderError(f"derivative order must be in 1..{MAX_ORDER}, got {p}")
        if grid.T > model.curve.t_max:
            raise DomainError("grid extends beyond the curve range")
        self.model, self.grid, self.p = model, grid, p
        t = grid.times
        self.u = model.curve(t)
        self.ubar = model.curve.cell_averages(t)
        self.sigma_T = total_variance(model.curve, grid.T)
        mid = 0.5 * (t[1:] + t[:-1])
        if model.is_affine:
            coeff = model.sigma_tilde(model.curve(mid))
            self.sampler = VolterraGaussian(model.kernel, t, coeff, method=method)
            if p >= 2:
                self.kbar = model.kernel.cell_average_matrix(t)[1:]  # (N, N)
                self.sig_d = [model.sigma_tilde.deriv(k, self.u[:-1]) for k in range(p)]
        else:
            self.sampler = VolterraGaussian(model.kernel, t, None, method=method)
        self.sqrt_d = [sqrt_derivative(k, self.u) for k in range(p + 1)]
        self.trap = grid.trapezoid_weights()
        self.sq_ubar = np.sqrt(self.ubar)

    def simulate(self, gen: np.random.Generator, n: int, antithetic: bool, keep_paths=False):
        N, dt, rho = self.grid.n_steps, self.grid.dt, self.model.rho
        z = normals(gen, n, (N, 2 + self.sampler.n_extra), antithetic)
        dW1, G = self.sampler.sample(z[:, :, 0], z[:, :, 2:])
        dW2 = z[:, :, 1] * np.sqrt(dt)
        dB = rho * dW1 + np.sqrt(max(0.0, 1.0 - rho * rho)) * dW2
        v = self._variance_derivatives(dW1, G)
        Y = dB @ self.sq_ubar
        xs = []
        for m in range(1, self.p + 1):
            sq = np.zeros_like(v[0])
            for k in range(1, m + 1):
                sq += self.sqrt_d[k] * bell(m, k, v[: m - k + 1])
            xs.append(np.einsum("ij,ij->i", sq[:, :-1], dB) - 0.5 * (v[m - 1] @ self.trap))
        return DerivativePathState(Y, xs, self.sigma_T, v if keep_paths else [],
                                   dW1 if keep_paths else None, dW2 if keep_paths else None)

    def _variance_derivatives(self, dW1, G):
        p = self.p
        if not self.model.is_affine:
            V = self.sampler.variance
            out = []
            hk = [np.ones_like(G), G]
            # H_m(G_t, V_t); the variance differs per time column
            for m in range(2, p + 1):
                hk.append((G * hk[-1] - V * hk[-2]) / m)
            for m in range(1, p + 1):
                out.append(self.u * factorial(m) * hk[m])
            return out
        v = [G]  # coeff already carries sigma(u) on each cell
        for m in range(2, p + 1):
            D = np.zeros_like(G[:, :-1])
            for k in range(1, m):
                D += self.sig_d[k] * bell(m - 1, k, [vi[:, :-1] for vi in v[: m - k]])
            vm = np.zeros_like(G)
            vm[:, 1:] = m * ((D * dW1) @ self.kbar.T)
            v.append(vm)
        return v


# ------------------------------------------------------------------ API
def simulate_paths(model: ModelSpec, grid: PathGrid, p: int, n_paths: int, seed: int,
                   antithetic: bool = True, chunk_size: int = DEFAULT_CHUNK,
                   threads: int | None = None, keep_paths: bool = False, method: str = "auto"):
    """Simulate derivative processes; returns one ``DerivativePathState`` per chunk."""
    sim = _Simulator(model, grid, p, method)
    return run_chunks(lambda gen, n, c: sim.simulate(gen, n, antithetic, keep_paths),
                      n_paths, seed, chunk_size, threads, antithetic)


def hermite_path_terminal(state: DerivativePathState, l: int):
    """``H_l(Y_T, Sigma_T)`` per path, from the terminal martingale value."""
    return hermite(l, state.Y, state.sigma_T)


def _check_index(i, k, l, strict):
    if not (1 <= k <= i <= MAX_ORDER):
        raise DomainError(f"need 1 <= k <= i <= {MAX_ORDER}, got i={i}, k={k}")
    if l < k:
        raise DomainError(f"need l >= k, got l={l}, k={k}")
    if strict and l > i + 2 * k:
        raise DomainError(f"need l <= i + 2k = {i + 2 * k}, got l={l}")


def _moment_values(state: DerivativePathState, terms: Sequence[tuple]) -> np.ndarray:
    """Per-path ``B_{i,k}(X^(1)..) H_h(Y)`` for each ``(i, k, h)``."""
    hmax = max(h for _, _, h in terms)
    H = hermite_all(hmax, state.Y, state.sigma_T)
    cols = []
    cache = {}
    for i, k, h in terms:
        if (i, k) not in cache:
            cache[(i, k)] = bell(i, k, state.x[: i - k + 1])
        cols.append(cache[(i, k)] * H[h])
    return np.column_stack(cols)


def estimate_moments(model: ModelSpec, grid: PathGrid, terms: Iterable[tuple], n_paths: int,
                     seed: int, antithetic: bool = True, chunk_size: int = DEFAULT_CHUNK,
                     threads: int | None = None, method: str = "auto") -> MCEstimateSet:
    """Jointly estimate ``E[B_{i,k} H_h]`` for every ``(i, k, h)`` in ``terms``.

    ``h`` is the Hermite index itself (no restriction beyond ``h >= 0``), so
    this also covers moments that must vanish.
    """
    terms = [tuple(int(a) for a in t) for t in terms]
    if not terms:
        raise DomainError("no terms requested")
    for i, k, h in terms:
        _check_index(i, k, k + h, strict=False)
    p = max(i for i, _, _ in terms)
    sim = _Simulator(model, grid, p, method)

    def work(gen, n, c):
        st = sim.simulate(gen, n, antithetic)
        return Moments.from_samples(pair_units(_moment_values(st, terms), antithetic))

    parts = run_chunks(work, n_paths, seed, chunk_size, threads, antithetic)
    return MCEstimateSet(terms, reduce_moments(parts), n_paths, seed, antithetic, chunk_size)


def estimate_coefficient(model: ModelSpec, grid: PathGrid, i: int, k: int, l: int, n_paths: int,
                         seed: int, antithetic: bool = True, chunk_size: int = DEFAULT_CHUNK,
                         threads: int | None = None) -> MCEstimate:
    """``E[B_{i,k}(X^(1), ...) H_{l-k}(Y_T, Sigma_T)]`` with ``k <= l <= i + 2k``."""
    _check_index(i, k, l, strict=True)
    est = estimate_moments(model, grid, [(i, k, l - k)], n_paths, seed, antithetic,
                           chunk_size, threads)
    return est[(i, k, l - k)]


def expansion_terms(p: int) -> list:
    """All admissible ``(i, k, l)`` with ``1 <= k <= i <= p`` and ``k <= l <= i + 2k``."""
    return [(i, k, l) for i in range(1, p + 1) for k in range(1, i + 1)
            for l in range(k, i + 2 * k + 1)]


def estimate_coefficients(model: ModelSpec, grid: PathGrid, p: int, n_paths: int, seed: int,
                          antithetic: bool = True, chunk_size: int = DEFAULT_CHUNK,
                          threads: int | None = None) -> MCEstimateSet:
    """Every expansion coefficient up to order ``p`` from one set of paths.

    Labels are ``(i, k, l)`` in the expansion convention (Hermite index ``l - k``).
    """
    terms = expansion_terms(p)
    est = estimate_moments(model, grid, [(i, k, l - k) for i, k, l in terms], n_paths, seed,
                           antithetic, chunk_size, threads)
    est.labels = terms
    return est


def forest_term_xm(model: ModelSpec, eps: float, grid: PathGrid, n_paths: int, seed: int,
                   normalized: bool = False, chunk_size: int = DEFAULT_CHUNK,
                   threads: int | None = None) -> MCEstimate:
    """Forest term ``eps rho int_0^T int_{t1}^T E[sigma(v_{t1}) g(t2-t1) sqrt(v_{t1})] dt2 dt1``.

    Integrating out ``t2`` leaves ``eps rho int E[sigma(v_t) sqrt(v_t)] G(T - t) dt``
    with ``G`` the kernel primitive; the outer integral uses the trapezoid
    rule on simulated spot paths. ``normalized=True`` drops the leading
    ``eps`` factor (useful at ``eps = 0``). Antithetic sampling is off: for
    the square-root class the integrand is linear in ``v`` and pairs would
    cancel exactly, leaving no noise estimate.
    """
    from .full_model import _SpotSimulator

    if not model.is_affine:
        raise ConfigurationError("the forest term is defined for the affine-drift class")
    if abs(eps) > 1.0:
        raise DomainError("vol-of-vol must satisfy |eps| <= 1")
    t = grid.times
    w = grid.trapezoid_weights() * model.kernel.integral(grid.T - t)
    scale = model.rho * (1.0 if normalized else eps)
    sim = _SpotSimulator(model, grid)

    def work(gen, n, c):
        v = np.maximum(sim.spot(gen, n, eps, antithetic=False)[0], 0.0)
        vals = model.sigma_tilde(v) * np.sqrt(v) @ w
        return Moments.from_samples(scale * vals)

    m = reduce_moments(run_chunks(work, n_paths, seed, chunk_size, threads, False))
    return MCEstimate(float(m.mean[0]), float(m.stderr[0]), n_paths, seed, False, chunk_size)
