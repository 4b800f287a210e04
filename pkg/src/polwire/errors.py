"""Exception hierarchy for polwire."""


class PolwireError(Exception):
    """Base class for all package errors."""


class ConfigError(PolwireError):
    """Invalid configuration. ``path`` names the offending key (dotted)."""

    def __init__(self, message, path=None):
        self.path = path
        where = f"{path}: " if path else ""
        super().__init__(f"{where}{message}")


class NumericalError(PolwireError):
    """Base class for failures of a numerical routine."""


class SamplingError(NumericalError):
    pass


class DimensionError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class DegenerateWavepacketError(NumericalError):
    pass


class NoMatterContentError(NumericalError):
    pass


class GridMismatchError(NumericalError):
    pass


class InsufficientSamplesError(NumericalError):
    pass


class NoOscillationError(NumericalError):
    pass


class RealizationError(NumericalError):
    """Wraps a failure inside one disorder realization of an ensemble run."""

    def __init__(self, point_index, realization_index, seed, cause):
        self.point_index = point_index
        self.realization_index = realization_index
        self.seed = seed
        self.cause = cause
        super().__init__(
            f"point {point_index}, realization {realization_index} "
            f"(seed {seed}): {type(cause).__name__}: {cause}"
        )


class PersistenceError(PolwireError):
    pass


class IncompatibleVersionError(PersistenceError):
    def __init__(self, found, expected):
        self.found = found
        self.expected = expected
        super().__init__(f"on-disk layout version {found!r} is not supported (expected {expected!r})")


class CorruptPayloadError(PersistenceError):
    pass
