"""Exception hierarchy.

Every error raised by the library derives from :class:`RBFRankError`. The three
families map one-to-one onto the CLI exit codes: constraint violations (2),
resource caps (3) and numerical failures (4).
"""


class RBFRankError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConstraintError(RBFRankError, ValueError):
    """A caller-supplied parameter violates an operation's precondition."""

    exit_code = 2


class ResourceError(RBFRankError):
    """A configured memory or size cap would be exceeded."""

    exit_code = 3


class NumericalError(RBFRankError, ArithmeticError):
    """A computation failed or would silently lose accuracy."""

    exit_code = 4


class InvalidDimensionError(ConstraintError):
    pass


class ContractError(ConstraintError):
    pass


class DimensionMismatchError(ConstraintError):
    pass


class DomainError(ConstraintError):
    pass


class InvalidEllipseError(ConstraintError):
    pass


class OrderTooLowError(ConstraintError):
    pass


class RegimeError(ConstraintError):
    pass


class UndersamplingError(ConstraintError):
    pass


class SmoothnessDegradationError(ConstraintError):
    pass


class InsufficientDataError(ConstraintError):
    pass


class InvalidProbabilityError(ConstraintError):
    pass


class CombinatorialOverflowError(NumericalError, OverflowError):
    """An integer formula left the supported 128-bit range."""


class ConditioningError(NumericalError):
    pass


class EvaluationError(NumericalError):
    """A user function returned a non-finite value."""


class SingularityError(NumericalError):
    """A singularity of the profile lies inside the requested Bernstein ellipse."""
