"""Exception types raised across the package."""


class VolVolError(Exception):
    """Base class for all package errors."""


class DomainError(VolVolError, ValueError):
    """An argument lies outside the domain of an operation."""


class SingularityError(DomainError):
    """A singular kernel was evaluated at its singular point."""


class ConfigurationError(VolVolError, ValueError):
    """A model, payoff or run configuration is invalid."""


class UnsupportedOrderError(VolVolError, ValueError):
    """A derivative or expansion order beyond the supported range was requested."""


class FactorizationError(VolVolError, ArithmeticError):
    """A covariance factorization failed."""
