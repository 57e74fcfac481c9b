"""Shared exception types."""


class InvalidInput(ValueError):
    """Raised when an argument violates a documented precondition."""


class MissingMoment(KeyError):
    """Raised when a moment vector lacks an entry required by a polynomial.

    Carries the offending exponent vector in ``args[0]``.
    """


class OrderError(InvalidInput):
    """Raised when a relaxation order is below the minimum admissible order."""


class InvalidAssignment(InvalidInput):
    """Raised when a constraint is localized on a clique missing one of its variables."""


class CoverageError(RuntimeError):
    """Raised internally when a constraint fits no clique; triggers clique merging."""
