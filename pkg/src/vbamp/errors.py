"""Exception types shared across the package."""


class DimensionMismatch(ValueError):
    """Array shapes are inconsistent with the measurement model."""


class InsufficientSamples(ValueError):
    """Too few measurement rows for the requested estimate."""


class SingularCovariance(ValueError):
    """A covariance matrix is rank deficient where full rank is required.

    Carries the name of the offending matrix in ``which``.
    """

    def __init__(self, which, message=None):
        self.which = which
        super().__init__(message or f"covariance '{which}' is singular or rank deficient")


class UnsupportedDimension(ValueError):
    """Requested channel count exceeds what the method supports."""


class DivergenceError(RuntimeError):
    """Iteration produced non-finite state or runaway residual energy.

    ``trace`` holds the per-iteration records up to the last finite state.
    """

    def __init__(self, message, trace=None):
        self.trace = trace
        super().__init__(message)


class ConfigError(ValueError):
    """Invalid run configuration (unknown key, missing value, bad type)."""
