"""Exception hierarchy shared by all modules."""


class LandauLabError(Exception):
    """Base class for every error raised by the package."""


class InvalidInputError(LandauLabError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateFormError(LandauLabError, ValueError):
    """The two-form is degenerate somewhere (K has a real eigenvalue)."""


class NonIntegralFluxError(LandauLabError, ValueError):
    """Total flux is not an integer multiple of 2*pi; the line bundle does not exist."""


class GridTooCoarseError(LandauLabError, ValueError):
    """Flux per plaquette is past the aliasing guard."""


class ConvergenceError(LandauLabError, RuntimeError):
    """The eigensolver did not reach the residual tolerance.

    ``residuals`` holds the best residual norms obtained.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class ClusterUndetectedError(LandauLabError, RuntimeError):
    """No spectral gap of the required size among the computed eigenvalues."""


class GapViolationError(LandauLabError, ValueError):
    """A spectral filter support would reach past the observed gap."""


class PhaseUnwrapError(LandauLabError, RuntimeError):
    """The kernel is too small near the requested point to read off a phase."""


class InsufficientDataError(LandauLabError, ValueError):
    """Too few usable samples for a fit."""
