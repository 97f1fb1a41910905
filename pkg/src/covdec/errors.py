"""Exception types raised across the package."""


class CovdecError(Exception):
    """Base class for all package errors."""


class DimensionError(CovdecError, ValueError):
    """Matrix shapes or dimensions do not match, or n < 2."""


class CertificateError(CovdecError, ValueError):
    """A CP / coCP / decomposability certificate does not hold."""


class ConsistencyError(CovdecError, RuntimeError):
    """Two independent routes to the same quantity disagree."""


class CongruenceError(CovdecError, ValueError):
    """A spectrum that was required to be congruence free is not."""


class NoIntertwinerError(CovdecError, RuntimeError):
    """No covariance intertwiner was found within tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class IntegrationError(CovdecError, RuntimeError):
    """The map-valued ODE integration became unstable."""


class ConditioningError(CovdecError, ValueError):
    """A map is too ill-conditioned to invert."""

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class InputError(CovdecError, ValueError):
    """Malformed user input; ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
