"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain where an operation is defined."""


class DegenerateConfigurationError(DomainError):
    """The requested geometric configuration does not exist (e.g. an empty sub-domain)."""


class ConfigurationError(ValueError):
    """A run or construction configuration is inconsistent."""


class NumericalError(RuntimeError):
    """An iterative solver or quadrature failed to converge."""


class SingularityError(DomainError):
    """Evaluation requested at (or too close to) a singular point or interface."""

    def __init__(self, message, distance=None):
        super().__init__(message)
        self.distance = distance
