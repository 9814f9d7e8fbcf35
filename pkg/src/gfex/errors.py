"""Exception types shared across the package, mapped to CLI exit codes."""


class GfexError(Exception):
    """Base class; `exit_code` drives the CLI's process status."""

    exit_code = 1


class InvalidParameterError(GfexError, ValueError):
    """A parameter violates a precondition (bad config, bad argument)."""

    exit_code = 2


class DomainError(GfexError, ValueError):
    """An analytic function was evaluated outside its domain."""

    exit_code = 3


class NumericFailureError(GfexError, ArithmeticError):
    """Quadrature/root finding failed to reach its tolerance contract."""

    exit_code = 3


class StatisticalFailureError(GfexError):
    """A statistical acceptance check failed."""

    exit_code = 4


class MalformedPathError(GfexError, ValueError):
    """A path object violates its structural invariants."""

    exit_code = 2


class InsufficientSampleError(GfexError):
    """Too few effective samples survive rejection/weighting."""

    exit_code = 4

    def __init__(self, msg, rejection_rate=None):
        super().__init__(msg)
        self.rejection_rate = rejection_rate
