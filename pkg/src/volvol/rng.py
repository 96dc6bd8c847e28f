"""Counter-based random streams and deterministic parallel reduction.

Paths are split into fixed-size chunks. Chunk ``c`` draws from a Philox
generator keyed by ``(seed, c)``, so its numbers do not depend on which worker
runs it. Per-chunk moment summaries are merged in chunk order, making results
bit-identical for any worker count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError

DEFAULT_CHUNK = 4096


def default_threads() -> int:
    env = os.environ.get("VOLVOL_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigurationError(f"VOLVOL_THREADS must be an integer, got {env!r}") from exc
        if n < 1:
            raise ConfigurationError("VOLVOL_THREADS must be positive")
        return n
    return os.cpu_count() or 1


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    """Independent generator for chunk ``chunk`` of run ``seed``."""
    if seed < 0:
        raise ConfigurationError("seed must be non-negative")
    return np.random.Generator(np.random.Philox(key=[int(seed) % 2 ** 64, int(chunk)]))


def chunk_sizes(n_paths: int, chunk_size: int, antithetic: bool) -> list:
    if n_paths < 2:
        raise ConfigurationError("need at least two paths")
    if chunk_size < 2:
        raise ConfigurationError("chunk size must be at least 2")
    if antithetic and (n_paths % 2 or chunk_size % 2):
        raise ConfigurationError("antithetic sampling needs even path and chunk counts")
    full, rest = divmod(n_paths, chunk_size)
    sizes = [chunk_size] * full
    if rest:
        sizes.append(rest)
    return sizes


def normals(gen: np.random.Generator, n: int, shape: Sequence[int], antithetic: bool) -> np.ndarray:
    """``(n, *shape)`` standard normals; the second half mirrors the first when antithetic."""
    if antithetic:
        half = gen.standard_normal((n // 2, *shape))
        return np.concatenate((half, -half))
    return gen.standard_normal((n, *shape))


@dataclass
class Moments:
    """Running count, mean vector and co-moment matrix (Chan et al. merge)."""

    n: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def from_samples(cls, x: np.ndarray) -> "Moments":
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        mean = x.mean(axis=0)
        d = x - mean
        return cls(len(x), mean, d.T @ d)

    def merge(self, other: "Moments") -> "Moments":
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        m2 = self.m2 + other.m2 + np.outer(delta, delta) * (self.n * other.n / n)
        return Moments(n, mean, m2)

    @property
    def cov(self) -> np.ndarray:
        return self.m2 / (self.n - 1)

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.cov), 0.0) / self.n)


def pair_units(values: np.ndarray, antithetic: bool) -> np.ndarray:
    """Independent sampling units: antithetic pairs are averaged."""
    if not antithetic:
        return values
    h = len(values) // 2
    return 0.5 * (values[:h] + values[h:])


def run_chunks(work: Callable[[np.random.Generator, int, int], object], n_paths: int,
               seed: int, chunk_size: int = DEFAULT_CHUNK, threads: int | None = None,
               antithetic: bool = False) -> list:
    """Evaluate ``work(gen, n, chunk_index)`` for every chunk, results in chunk order."""
    sizes = chunk_sizes(n_paths, chunk_size, antithetic)
    threads = default_threads() if threads is None else int(threads)
    if threads < 1:
        raise ConfigurationError("thread count must be positive")

    def job(c):
        return work(chunk_generator(seed, c), sizes[c], c)

    if threads == 1 or len(sizes) == 1:
        return [job(c) for c in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, range(len(sizes))))


def reduce_moments(parts: Sequence[Moments]) -> Moments:
    out = parts[0]
    for p in parts[1:]:
        out = out.merge(p)
    return out
