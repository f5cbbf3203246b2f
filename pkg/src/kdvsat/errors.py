"""Exception types raised across the package."""


class KdvSatError(Exception):
    """Base class for all package errors."""


class TruncationLoss(KdvSatError):
    """Mass pushed beyond the retained Fourier window exceeded tolerance."""

    def __init__(self, tail, tol, where=""):
        self.tail = tail
        self.tol = tol
        msg = f"discarded spectral tail {tail:.3e} exceeds tolerance {tol:.1e}"
        if where:
            msg += f" ({where})"
        super().__init__(msg)


class NonDiffeo(KdvSatError):
    """A sampled map failed to be an orientation-preserving diffeomorphism."""


class NotPositive(KdvSatError):
    """A field that must stay strictly positive touched zero."""


class NotInSpan(KdvSatError):
    """A phase is not a linear combination of the control profiles."""


class DepthBudget(KdvSatError):
    """Certificate lowering recursed deeper than allowed."""


class BudgetExceeded(KdvSatError):
    """Calibration ran out of iterations or time before reaching tolerance."""

    def __init__(self, msg, best_error=None, curve=None):
        self.best_error = best_error
        self.curve = curve or []
        super().__init__(msg)


class CostGuard(KdvSatError):
    """Dense computation refused because the mode count is too large."""


class DegenerateFit(KdvSatError):
    """Too few usable points remain for a log-log rate fit."""


class NormMismatch(KdvSatError, ValueError):
    """Initial and target states do not have equal L2 norms."""


class ConfigError(KdvSatError, ValueError):
    """Invalid run configuration."""
