"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when a config, profile name, or grid setting is invalid."""


class NumericError(RuntimeError):
    """Raised on non-finite inputs or a failed/inconsistent decomposition."""


class NoCapacityError(ValueError):
    """Raised when power allocation is requested over all-zero eigenvalues."""
