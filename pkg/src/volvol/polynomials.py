"""Variance-parameterized Hermite polynomials and partial Bell polynomials."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Sequence

import numpy as np

from .errors import DomainError


def hermite_all(n: int, x, sigma: float) -> list:
    """Return ``[H_0, ..., H_n]`` evaluated at ``x`` with variance ``sigma``.

    Uses the three-term recursion ``H_k = (x H_{k-1} - sigma H_{k-2}) / k``,
    which gives ``d/dx H_k = H_{k-1}`` and ``E[H_k(Z, sigma)^2] = sigma^k / k!``
    for ``Z ~ N(0, sigma)``.
    """
    if n < 0:
        raise DomainError("Hermite order must be non-negative")
    if not sigma > 0.0:
        raise DomainError(f"variance parameter must be positive, got {sigma}")
    x = np.asarray(x, dtype=float)
    out = [np.ones_like(x)]
    if n >= 1:
        out.append(x.copy())
    for k in range(2, n + 1):
        out.append((x * out[-1] - sigma * out[-2]) / k)
    return out


def hermite(n: int, x, sigma: float):
    """Generalized Hermite polynomial ``H_n(x, sigma)``.

    Examples
    --------
    >>> hermite(3, 2.0, 1.0)  # (x^3 - 3 sigma x) / 6
    0.333...
    """
    val = hermite_all(n, x, sigma)[n]
    return val if np.ndim(val) else float(val)


@dataclass(frozen=True)
class BellIndexSet:
    """Tuples ``(j_1, ..., j_{n-k+1})`` with ``sum j = k`` and ``sum i j_i = n``."""

    n: int
    k: int
    tuples: tuple

    def __iter__(self):
        return iter(self.tuples)

    def __len__(self):
        return len(self.tuples)


@lru_cache(maxsize=None)
def _tnk(n: int, k: int) -> tuple:
    if n == 0 and k == 0:
        return ((),)
    if k == 0 or n == 0:
        return ()
    length = n - k + 1
    found = []

    def rec(pos: int, left_k: int, left_n: int, acc: list):
        if pos > length:
            if left_k == 0 and left_n == 0:
                found.append(tuple(acc))
            return
        top = min(left_k, left_n // pos)
        for j in range(top + 1):
            acc.append(j)
            rec(pos + 1, left_k - j, left_n - pos * j, acc)
            acc.pop()

    rec(1, k, n, [])
    return tuple(sorted(found))


def enumerate_tnk(n: int, k: int) -> BellIndexSet:
    """Enumerate ``T(n, k)`` in lexicographic order."""
    if n < 0 or k < 0:
        raise DomainError("n and k must be non-negative")
    if k > n:
        raise DomainError(f"block count k={k} exceeds order n={n}")
    return BellIndexSet(n, k, _tnk(n, k))


def bell(n: int, k: int, xs: Sequence) -> float | np.ndarray:
    """Partial Bell polynomial ``B_{n,k}(x_1, ..., x_{n-k+1})``.

    ``xs`` may hold scalars or equally-shaped arrays (one array per argument),
    in which case the result is evaluated elementwise.
    """
    idx = enumerate_tnk(n, k)
    need = n - k + 1 if n > 0 else 0
    if len(xs) < need:
        raise DomainError(f"bell({n},{k}) needs {need} arguments, got {len(xs)}")
    if n == 0:
        return 1.0
    xs = [np.asarray(x, dtype=float) for x in xs[:need]]
    total = np.zeros(np.broadcast(*xs).shape) if xs else 0.0
    for j in idx:
        coef = factorial(n)
        term = 1.0
        for i, ji in enumerate(j, start=1):
            if ji:
                coef //= factorial(ji)
                term = term * (xs[i - 1] / factorial(i)) ** ji
        total = total + coef * term
    return total if np.ndim(total) else float(total)
