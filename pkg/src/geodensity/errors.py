"""Exception types shared across the package."""


class GeodensityError(Exception):
    """Base class for errors raised by geodensity."""


class InvalidArgument(GeodensityError, ValueError):
    """A precondition on an argument is violated."""


class SingularityError(GeodensityError, ArithmeticError):
    """An integrand or determinant was evaluated on one of its poles."""


class NonFiniteResult(GeodensityError, ArithmeticError):
    """A quadrature produced NaN or infinite values."""
