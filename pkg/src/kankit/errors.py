"""Exception types shared across the package."""


class KankitError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(KankitError):
    """Invalid experiment configuration (bad key, bad value, bad schema)."""


class ModelFormatError(KankitError):
    """A model file could not be decoded."""


class NumericalAbort(KankitError):
    """A computation produced non-finite values or drifted past a guard."""
