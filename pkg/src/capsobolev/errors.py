"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class ParameterError(ValueError):
    """Inconsistent or unsupported parameter combination."""


class WeightError(ValueError):
    """A weight fails validation or is degenerate for the requested quantity."""


class QuadratureError(ArithmeticError):
    """Quadrature did not reach the requested accuracy.

    ``estimate`` carries the achieved error estimate.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class InconsistencyError(RuntimeError):
    """Two quantities that must agree by construction do not."""
