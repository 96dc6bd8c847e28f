import pytest

from volvol.errors import ConfigurationError
from volvol.validation import MIN_PATHS, SUITES, call_log_derivatives, run_validation


def test_full_validation_passes():
    checks = run_validation(n_paths=MIN_PATHS, seed=0, threads=1)
    failed = [c for c in checks if not c.passed]
    assert not failed, failed
    assert {c.suite for c in checks} == set(SUITES)


def test_validation_rejects_small_runs_and_unknown_suites():
    with pytest.raises(ConfigurationError):
        run_validation(n_paths=MIN_PATHS // 2)
    with pytest.raises(ConfigurationError):
        run_validation(["polynomials", "greeks"])


def test_closed_form_call_derivatives_at_the_money():
    F = call_log_derivatives(0.0, 1.0, 0.04, 3)
    # F^1 = N(d1) with d1 = 0.1
    assert F[1] == pytest.approx(0.539827837277029, rel=1e-14)
