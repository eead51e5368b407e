class RadilocError(Exception):
    """Base class for errors raised by radiloc."""


class InputError(RadilocError, ValueError):
    """Malformed or inconsistent input data."""


class ConfigError(RadilocError, ValueError):
    """Invalid configuration value."""


class UndefinedMetricError(RadilocError, ValueError):
    """A metric is undefined for the given input (e.g. AUC with one class)."""
