"""Exception hierarchy shared by all kacchaos modules."""


class KacError(Exception):
    """Base class for every error raised by this package."""


class DomainError(KacError, ValueError):
    """An argument lies outside the domain of an operation."""


class NumericError(KacError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message if residual is None else f"{message} (residual={residual:.3e})")
        self.residual = residual


class BracketError(NumericError):
    """No sign change could be found for a root search."""


class TruncationError(NumericError):
    """A tail bound for a semi-infinite integral could not be established."""


class AccuracyError(NumericError):
    """Adaptive quadrature did not meet the requested error estimate."""


class ContractError(KacError, ValueError):
    """A precondition of an operation was violated by the caller."""


class ValidationError(KacError):
    """An energy function failed the conditions required by a solver."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class StatisticalTestFailure(KacError):
    """A statistical pre-test refused to proceed (e.g. unequilibrated input)."""
