"""Exception hierarchy shared by every module of the package."""


class CssDppError(Exception):
    """Base class for all errors raised by cssdpp."""


class InputError(CssDppError, ValueError):
    """Malformed or out-of-range input."""


class RankError(CssDppError, ValueError):
    """Requested rank exceeds the numerical rank of the input."""


class CapacityError(CssDppError, RuntimeError):
    """Exhaustive enumeration would exceed the configured capacity."""


class InfeasibleError(CssDppError, ValueError):
    """Targets (spectrum, diagonal, eigensteps) admit no solution."""


class InvariantViolation(CssDppError, RuntimeError):
    """An internal invariant failed (normalization, probability mass, ...)."""


class SingularityError(CssDppError, ArithmeticError):
    """A matrix that must be inverted is numerically singular."""


class RejectionBudgetError(CssDppError, RuntimeError):
    """Rejection sampling exceeded its attempt budget."""


class ConsistencyError(CssDppError, RuntimeError):
    """Two independent computations of the same quantity disagree."""
