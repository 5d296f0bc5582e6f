"""Exception hierarchy shared by every module of the package."""


class ProjdynError(Exception):
    """Base class for all package errors."""


class AllZero(ProjdynError, ValueError):
    """Homogeneous coordinates with no finite nonzero entry."""


class NonFinite(AllZero):
    """A coordinate or coefficient is NaN or infinite."""


class DimMismatch(ProjdynError, ValueError):
    pass


class Degenerate(ProjdynError, ValueError):
    """The components of a map share a nontrivial common zero."""


class DegenerateImage(ProjdynError, ArithmeticError):
    """F vanished at a point that should not be a common zero."""


class SolverFailure(ProjdynError, ArithmeticError):
    """Polished preimages still miss the target by more than the residual tolerance."""


class CapExceeded(ProjdynError, ValueError):
    pass


class NotSupported(ProjdynError, NotImplementedError):
    pass


class ExceptionalBase(ProjdynError, ValueError):
    """Base point lies in (or is flagged as) the exceptional set."""


class EmptyMeasure(ProjdynError, ValueError):
    pass


class InsufficientData(ProjdynError, ValueError):
    pass


class PoleTooClose(ProjdynError, ValueError):
    pass


class ConfigError(ProjdynError, ValueError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
