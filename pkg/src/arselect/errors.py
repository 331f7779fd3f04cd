"""Exception hierarchy shared by every module."""


class ArselectError(Exception):
    """Base class for library errors."""


class InvalidSpecError(ArselectError, ValueError):
    """Process specification is not causal, invertible or stationary."""


class PrecisionError(ArselectError):
    """A truncated infinite series cannot meet the requested precision."""

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class InvalidWindowError(ArselectError, ValueError):
    """Maximal order does not leave any observations in the fitting window."""


class RankDegeneracyError(ArselectError):
    """A leading Gram block is numerically singular."""

    def __init__(self, message, order=None):
        super().__init__(message)
        self.order = order


class NumericalDegeneracyError(ArselectError):
    """Toeplitz segment of a theoretical autocovariance is not positive definite."""


class DegenerateFitError(ArselectError):
    """Zero residual variance fed to a log-based criterion."""


class ConfigError(ArselectError, ValueError):
    """Malformed experiment or process configuration."""
