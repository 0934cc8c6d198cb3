class DomainError(ValueError):
    """Raised when an argument falls outside the domain of an operation."""


class GridRangeError(ValueError):
    """
    Raised when a grid of points cannot answer the question asked of it,
    e.g. a P or q column that never crosses the requested level, or
    collapsed curves without a common abscissa range.
    """


class InvariantViolation(RuntimeError):
    """Raised when a realization breaks a conservation or termination bound."""
