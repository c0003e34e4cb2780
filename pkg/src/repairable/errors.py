"""Exception hierarchy shared by every module.

The command-line front end maps these onto exit codes, so library code
raises the most specific class that applies.
"""


class RepairableError(Exception):
    """Base class for errors raised by this package."""


class DataError(RepairableError, ValueError):
    """Input data violates the event-data invariants."""


class DomainError(RepairableError, ValueError):
    """A model parameter or argument lies outside its domain."""


class NumericalError(RepairableError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy value."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach its tolerance before the node cap.

    Attributes
    ----------
    estimate : float
        Best available estimate (from the largest rule tried).
    gap : float
        Absolute change between the two largest rules.
    """

    def __init__(self, message, estimate, gap):
        super().__init__(message)
        self.estimate = estimate
        self.gap = gap


class StarvedProcessError(NumericalError):
    """A marked process has no usable total intensity."""
