"""Exception hierarchy for tqslab."""


class TQSError(ValueError):
    """Base class for every precondition violation raised by tqslab."""


class DimensionMismatchError(TQSError):
    pass


class NotHermitianError(TQSError):
    pass


class FlagViolationError(TQSError):
    """An operator was declared with a structure flag it does not satisfy."""


class NotTranslationalError(TQSError):
    pass


class GridAlignmentError(TQSError):
    """A requested translation is not an integer number of grid steps.

    ``leakage`` is the norm of the part of the evolved state that does not
    land on the nearest grid-aligned target.
    """

    def __init__(self, message, leakage=float("nan")):
        super().__init__(message)
        self.leakage = leakage


class WrapAroundError(TQSError):
    pass


class IncommensurateError(TQSError):
    """A system spectrum does not sit on the clock frequency lattice.

    ``residual`` is the largest distance (in angular-frequency units) from an
    eigenvalue to the nearest lattice point.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class NonBijectiveError(TQSError):
    pass


class OrbitLengthError(TQSError):
    def __init__(self, message, lengths=()):
        super().__init__(message)
        self.lengths = tuple(lengths)


class GridFactorizationError(TQSError):
    pass


class MultiplicityMismatchError(TQSError):
    pass


class LatticeMismatchError(TQSError):
    pass


class ConfigError(TQSError):
    """Malformed experiment configuration (CLI exit code 2)."""
