"""Exception types shared across the package."""


class NsasError(Exception):
    """Base class for all package errors."""


class ShapeError(NsasError):
    """Array shape or axis does not match the grid."""


class ParameterError(NsasError):
    """Physical or numerical parameter outside its admissible range."""


class StateError(NsasError):
    """Field state violates a structural requirement (finiteness, vacuum margin)."""


class StabilityError(NsasError):
    """A linearization is not dissipative for the given background."""


class AlignmentError(NsasError):
    """Two trajectories do not share grids or diagnostic timestamps."""


class DataError(NsasError):
    """Malformed on-disk data (checkpoint, series file)."""


class ConfigError(NsasError):
    """Malformed or inconsistent run configuration."""


class DivergenceError(NsasError):
    """Time integration produced non-finite values."""
