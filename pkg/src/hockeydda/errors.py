"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration value (non-positive dimension, inverted range, ...)."""


class ShapeError(ValueError):
    """Array/parameter shape mismatch."""


class NumericStateError(ValueError):
    """Non-finite value where a finite one is required."""


class EmptyInputError(ValueError):
    """An operation received an empty trajectory, sequence, or batch."""


class AssetError(FileNotFoundError):
    """A required checkpoint or other trained asset is missing or invalid."""


class UnsupportedModeError(ValueError):
    """A gradient or training mode not supported for the given network layout."""
