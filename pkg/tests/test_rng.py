import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from volvol.errors import ConfigurationError
from volvol.rng import (Moments, chunk_generator, chunk_sizes, default_threads, normals,
                        pair_units, reduce_moments, run_chunks)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.integers(2, 40), st.integers(0, 2 ** 32))
def test_merge_equals_pooled_statistics(n1, n2, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(n1, 3)), rng.normal(size=(n2, 3)) + 5.0
    m = Moments.from_samples(a).merge(Moments.from_samples(b))
    pooled = np.vstack([a, b])
    np.testing.assert_allclose(m.mean, pooled.mean(axis=0), rtol=1e-12)
    np.testing.assert_allclose(m.cov, np.cov(pooled.T), rtol=1e-10, atol=1e-12)


def test_chunk_streams_are_keyed():
    a = chunk_generator(7, 3).standard_normal(5)
    assert np.array_equal(a, chunk_generator(7, 3).standard_normal(5))
    assert not np.array_equal(a, chunk_generator(7, 4).standard_normal(5))
    assert not np.array_equal(a, chunk_generator(8, 3).standard_normal(5))
    with pytest.raises(ConfigurationError):
        chunk_generator(-1, 0)


def test_chunk_sizes():
    assert chunk_sizes(10, 4, False) == [4, 4, 2]
    assert chunk_sizes(8, 4, True) == [4, 4]
    for args in [(1, 4, False), (8, 1, False), (9, 4, True), (8, 3, True)]:
        with pytest.raises(ConfigurationError):
            chunk_sizes(*args)


def test_antithetic_normals_and_pairs():
    z = normals(chunk_generator(0, 0), 6, (2,), True)
    np.testing.assert_array_equal(z[:3], -z[3:])
    np.testing.assert_array_equal(pair_units(z, True), 0.0)
    assert pair_units(z, False) is z


def test_run_chunks_thread_invariant():
    def work(gen, n, c):
        return Moments.from_samples(gen.standard_normal((n, 2)))

    one = reduce_moments(run_chunks(work, 1000, 5, 64, threads=1))
    four = reduce_moments(run_chunks(work, 1000, 5, 64, threads=4))
    assert one.n == 1000
    np.testing.assert_array_equal(one.mean, four.mean)
    np.testing.assert_array_equal(one.m2, four.m2)


def test_default_threads_env(monkeypatch):
    monkeypatch.setenv("VOLVOL_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.setenv("VOLVOL_THREADS", "zero")
    with pytest.raises(ConfigurationError):
        default_threads()
    monkeypatch.setenv("VOLVOL_THREADS", "0")
    with pytest.raises(ConfigurationError):
        default_threads()
