"""Gauss-Legendre rules with endpoint-clustering substitutions."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(a: float, b: float, n: int):
    """Nodes and weights of the ``n``-point rule on ``[a, b]``."""
    x, w = _gl(int(n))
    return a + (b - a) * x, (b - a) * w


def singular_nodes(a: float, b: float, n: int, q: float = 1.0):
    """Rule on ``[a, b]`` clustered at ``a`` via ``s = a + (b - a) z**q``.

    With ``q = 1/(1 - gamma)`` an integrand behaving like ``(s - a)**(-gamma)``
    becomes smooth in ``z``.
    """
    z, wz = _gl(int(n))
    L = b - a
    s = a + L * z ** q
    w = L * q * z ** (q - 1.0) * wz
    return s, w


def two_sided_nodes(a: float, b: float, n: int, q: float = 1.0):
    """Rule on ``[a, b]`` clustered at both ends: split at the midpoint."""
    m = 0.5 * (a + b)
    s1, w1 = singular_nodes(a, m, n, q)
    s2, w2 = singular_nodes(b, m, n, q)  # mirrored: clusters at b
    return np.concatenate((s1, s2[::-1])), np.concatenate((w1, -w2[::-1]))
