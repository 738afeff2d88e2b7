"""Exception types shared across the package."""


class SlopeCalcError(Exception):
    """Base class for all errors raised by slopecalc."""


class DimensionError(SlopeCalcError, ValueError):
    pass


class NonFiniteError(SlopeCalcError, ValueError):
    pass


class ConvergenceError(SlopeCalcError, RuntimeError):
    """An iterative method hit its iteration cap."""


class CoincidentPointsError(SlopeCalcError, ValueError):
    pass


class DomainError(SlopeCalcError, ValueError):
    """A probe point left the domain box of a function."""


class SingularOperatorError(SlopeCalcError, ValueError):
    pass


class ContractionError(SlopeCalcError, RuntimeError):
    """The contraction hypothesis of a fixed-point problem appears violated."""
