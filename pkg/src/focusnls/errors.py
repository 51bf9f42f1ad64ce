"""Exception hierarchy shared by every subpackage."""


class FocusNLSError(Exception):
    """Base class for all errors raised by focusnls."""


class DomainError(FocusNLSError, ValueError):
    """A scalar argument lies outside the range where a formula is defined."""


class PreconditionError(FocusNLSError, ValueError):
    """An input violates a documented precondition (e.g. a repulsive mean)."""


class ShapeError(FocusNLSError, ValueError):
    """Array sizes do not match the basis they are used with."""


class WindowError(PreconditionError):
    """(N, omega) lies outside the requested scaling window."""


class ConvergenceError(FocusNLSError, RuntimeError):
    """An iterative solver hit its iteration cap.

    The ``trace`` attribute keeps whatever history the solver recorded.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class KrylovBreakdown(FocusNLSError, RuntimeError):
    """A Krylov step could not reach tolerance even after step halving."""


class CollapseError(FocusNLSError, RuntimeError):
    """The NLS field exceeded its sup-norm ceiling (resolution failure)."""


class DegenerateCutoffError(FocusNLSError, RuntimeError):
    """A spectral cutoff annihilated the state."""


class SamplingError(FocusNLSError, ValueError):
    """A trajectory lacks the samples a finite-difference check needs."""


class ConfigError(FocusNLSError, ValueError):
    """Invalid or unknown keys in an experiment configuration."""


class SnapshotError(FocusNLSError, IOError):
    """A snapshot file is corrupt or was written by an incompatible version."""


class BasisError(FocusNLSError, RuntimeError):
    """A basis failed its construction checks (e.g. non-orthonormal quadrature)."""
