"""Exception types shared across the simulation modules."""


class ConfigurationError(Exception):
    """A required configuration value is missing or inconsistent."""


class GeometryError(Exception):
    """A geometric construction has no solution (e.g. empty active set)."""


class SingularityError(Exception):
    """An evaluation point coincides with a field singularity."""


class DegenerateInputError(Exception):
    """Input data carries no usable signal (e.g. an all-zero field)."""


class NoValidZoneError(Exception):
    """No sub-array can serve the listener position for a focused source."""


class DegenerateParallaxError(Exception):
    """Bearing rays are too close to parallel to triangulate."""


class InsufficientDataError(Exception):
    """Too few samples to compute the requested statistic."""


class UndefinedFractionError(Exception):
    """A fraction was requested over an empty selection."""
