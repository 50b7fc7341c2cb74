"""Exception types shared across the package."""


class NumericalInstability(RuntimeError):
    """Raised when an evolution produces NaNs or the norm drifts."""


class SizeGuardError(ValueError):
    """Raised when a dense-matrix path is asked for too large a grid."""


class ConfigError(ValueError):
    """Raised for run configurations that fail schema or sanity checks."""
