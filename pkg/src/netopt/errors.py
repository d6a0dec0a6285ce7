"""Semantic exception hierarchy.

Divergent integrals are *values* (math.inf), not exceptions; these classes
cover genuine contract violations and numerical failures.
"""


class NetoptError(Exception):
    """Base class for all package errors."""


class DomainError(NetoptError, ValueError):
    """Evaluation requested outside a weight function's representable domain."""


class DivergentSeriesError(NetoptError, ArithmeticError):
    """A series tail could not be certified within the term budget."""


class QuadratureFailure(NetoptError, ArithmeticError):
    """Adaptive quadrature could not meet its tolerance at max depth."""


class MassOutOfRangeError(NetoptError, ValueError):
    """Requested cumulative mass is negative or exceeds the total mass."""


class NotIntegrableError(NetoptError, ValueError):
    """Operation requires a finite integral of the weight, which diverges."""


class BadCutoffError(NetoptError, ValueError):
    """Truncation point T outside (0, 1)."""


class InfiniteValueError(NetoptError, ArithmeticError):
    """Every feasible net has divergent error (terminal cell diverges)."""


class TooLargeError(NetoptError, ValueError):
    """Brute-force enumeration would exceed the candidate budget."""


class SnapTooCoarseError(NetoptError, ValueError):
    """Net knots cannot be represented on the simulation fine grid."""


class InsufficientDataError(NetoptError, ValueError):
    """Not enough finite rows for a rate fit."""


class MonotonicityViolationError(NetoptError, ArithmeticError):
    """A derived weight failed its monotonicity certificate."""
