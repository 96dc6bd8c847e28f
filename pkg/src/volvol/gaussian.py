"""Exact joint sampling of a Gaussian Volterra process and its Brownian driver.

For a uniform grid ``t_0 < ... < t_N`` and a cell-wise constant integrand
``c_j`` the process

    H_i = sum_j c_j int_{t_j}^{t_{j+1}} g(t_i - s) dW_s

is split into its regression on the increments ``dW_j`` (coefficients are
the kernel cell averages) plus a residual that is independent of every
increment. The residual covariance is accumulated cell by cell from centred
quadrature (so it is positive semi-definite by construction) and factored
once. Sampling then costs two triangular matrix products per path.

For exponential-sum kernels the same decomposition is done per cell on the
finite-dimensional Markov state, which is much cheaper.
"""
from __future__ import annotations

import numpy as np
from scipy import linalg

from .errors import ConfigurationError, FactorizationError
from .kernels import ExpSumKernel, ExponentialKernel, Kernel, _phi1
from .quadrature import _gl

DENSE_LIMIT = 4096
_CELL_NODES = 16


def _as_expsum(kernel: Kernel):
    if isinstance(kernel, ExponentialKernel):
        return kernel.as_expsum()
    if isinstance(kernel, ExpSumKernel):
        return kernel
    return None


def robust_cholesky(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, retried with a growing diagonal jitter."""
    scale = float(np.mean(np.diag(cov))) if cov.size else 0.0
    if scale <= 0.0:
        return np.zeros_like(cov)
    jitter = 0.0
    for _ in range(12):
        try:
            return linalg.cholesky(cov + jitter * np.eye(len(cov)), lower=True, check_finite=False)
        except linalg.LinAlgError:
            jitter = scale * 1e-14 if jitter == 0.0 else jitter * 10.0
    raise FactorizationError(
        "residual covariance is not positive definite even with jitter; "
        "increase n_steps or use method='euler'")


class VolterraGaussian:
    """Joint sampler of ``(dW_0..dW_{N-1}, H_0..H_N)``.

    Parameters
    ----------
    kernel : Kernel
    times : array
        Uniform grid starting at 0.
    coeff : array, optional
        Cell values ``c_j`` of the integrand (default 1).
    method : {"auto", "dense", "recursive", "euler"}
        ``auto`` picks ``recursive`` for exponential sums, ``dense`` up to
        ``DENSE_LIMIT`` steps and ``euler`` beyond.
    """

    def __init__(self, kernel: Kernel, times, coeff=None, method: str = "auto",
                 cell_nodes: int = _CELL_NODES):
        times = np.asarray(times, dtype=float)
        n = len(times) - 1
        if n < 1 or times[0] != 0.0:
            raise ConfigurationError("grid must start at 0 and have at least one cell")
        dt = np.diff(times)
        if not np.allclose(dt, dt[0], rtol=1e-12, atol=0.0):
            raise ConfigurationError("Volterra sampler needs a uniform grid")
        self.kernel = kernel
        self.times = times
        self.n_steps = n
        self.dt = float(dt[0])
        self.coeff = np.ones(n) if coeff is None else np.asarray(coeff, dtype=float)
        if self.coeff.shape != (n,):
            raise ConfigurationError("coeff must hold one value per cell")
        es = _as_expsum(kernel)
        if method == "auto":
            method = "recursive" if es is not None else ("dense" if n <= DENSE_LIMIT else "euler")
        if method not in ("dense", "recursive", "euler"):
            raise ConfigurationError(f"unknown sampling method {method!r}")
        if method == "recursive" and es is None:
            raise ConfigurationError("recursive sampling needs an exponential-sum kernel")
        self.method = method
        if method == "recursive":
            self._setup_recursive(es)
        else:
            self._setup_dense(cell_nodes, residual=(method == "dense"))

    # ------------------------------------------------------------------ setup
    def _setup_dense(self, m: int, residual: bool):
        t, n, dt, c = self.times, self.n_steps, self.dt, self.coeff
        kbar = self.kernel.cell_average_matrix(t)[1:]  # rows t_1..t_N
        self._kc = kbar * c[None, :]
        var = dt * np.sum(self._kc ** 2, axis=1)
        self._chol = None
        if residual:
            a = self.kernel.singular_exponent
            # integer multiples of 1/(1-2a) keep the g^2 term polynomial in z;
            # q >= 4 also pushes the fractional g*kbar power above 2
            q = 1.0
            if a > 0.0:
                q0 = 1.0 / (1.0 - 2.0 * a)
                q = np.ceil(4.0 / q0) * q0
            z, wz = _gl(int(m))
            off = dt * z ** q  # s = t_{j+1} - off
            sw = np.sqrt(dt * q * z ** (q - 1.0) * wz)
            R = np.zeros((n, n))
            block = max(1, min(n, 2 ** 22 // (n * m)))
            rows = np.arange(1, n + 1)
            for j0 in range(0, n, block):
                js = np.arange(j0, min(n, j0 + block))
                # lag[i, j, k] = t_i - s_{j,k}
                lag = t[rows][:, None, None] - t[js + 1][None, :, None] + off[None, None, :]
                valid = rows[:, None] > js[None, :]
                vals = self.kernel._eval(np.where(valid[:, :, None], lag, 1.0))
                cent = (vals - kbar[:, js][:, :, None]) * (c[js][None, :, None] * sw[None, None, :])
                cent = np.where(valid[:, :, None], cent, 0.0).reshape(n, -1)
                R += cent @ cent.T
            self._chol = robust_cholesky(R)
            var = var + np.sum(self._chol ** 2, axis=1)
        self._variance = np.concatenate(([0.0], var))

    def _setup_recursive(self, es: ExpSumKernel):
        dt, c = self.dt, self.coeff
        r, w = es.rates, es.weights
        self._decay = np.exp(-r * dt)
        cross = dt * _phi1(r * dt)  # Cov(dW, I_k)
        Q = dt * _phi1((r[:, None] + r[None, :]) * dt)  # Cov(I_k, I_l)
        self._beta = cross / dt
        resid = Q - np.outer(cross, cross) / dt
        lam, vec = np.linalg.eigh(resid)
        self._rsqrt = vec * np.sqrt(np.maximum(lam, 0.0))[None, :]
        self._weights = w
        # exact variance by covariance propagation
        P = np.zeros_like(Q)
        D = np.diag(self._decay)
        var = [0.0]
        for cj in c:
            P = D @ P @ D + cj * cj * Q
            var.append(float(w @ P @ w))
        self._variance = np.array(var)

    # --------------------------------------------------------------- sampling
    @property
    def n_extra(self) -> int:
        """Number of additional standard normals per path and step."""
        if self.method == "dense":
            return 1
        if self.method == "recursive":
            return len(self._weights)
        return 0

    def regression_matrix(self) -> np.ndarray:
        """``R[i-1, j] = Cov(H_i, dW_j) / dt`` for ``i = 1..N``."""
        if self.method != "recursive":
            return self._kc
        n = self.n_steps
        lags = np.arange(n)[:, None] - np.arange(n)[None, :]  # i-1-j
        mask = lags >= 0
        pw = self._decay[None, None, :] ** np.where(mask, lags, 0)[:, :, None]
        out = (pw * (self._weights * self._beta)[None, None, :]).sum(axis=2)
        return np.where(mask, out, 0.0) * self.coeff[None, :]

    @property
    def variance(self) -> np.ndarray:
        """Exact variance of ``H_i`` under the sampled law, ``i = 0..N``."""
        return self._variance

    def sample(self, z_w: np.ndarray, z_extra: np.ndarray | None = None):
        """Map standard normals to ``(dW, H)``.

        Parameters
        ----------
        z_w : array (n_paths, N)
            Normals driving the Brownian increments.
        z_extra : array (n_paths, N, n_extra), optional
            Normals for the residual part (ignored by ``euler``).

        Returns
        -------
        dW : array (n_paths, N)
        H : array (n_paths, N + 1), with ``H[:, 0] = 0``
        """
        z_w = np.ascontiguousarray(z_w, dtype=float)
        npaths, n = z_w.shape
        if n != self.n_steps:
            raise ConfigurationError("normals do not match the grid")
        dW = z_w * np.sqrt(self.dt)
        H = np.zeros((npaths, n + 1))
        if self.method == "recursive":
            c = self.coeff
            state = np.zeros((npaths, len(self._weights)))
            for j in range(n):
                eta = np.ascontiguousarray(z_extra[:, j, :]) @ self._rsqrt.T
                state = state * self._decay + c[j] * (dW[:, j:j + 1] * self._beta + eta)
                H[:, j + 1] = state @ self._weights
            return dW, H
        H[:, 1:] = dW @ self._kc.T
        if self.method == "dense":
            H[:, 1:] += np.ascontiguousarray(z_extra[:, :, 0]) @ self._chol.T
        return dW, H
