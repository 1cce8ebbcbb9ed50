"""Exception hierarchy shared by all diracflow modules."""

from __future__ import annotations


class DiracflowError(Exception):
    """Base class for all package errors."""


class InvalidGeometryError(DiracflowError):
    """Domain geometry violates an invariant (ordering, containment, overlap)."""


class InvalidBoundaryDataError(DiracflowError):
    """Boundary data is inadmissible (B = 0, bad sign, missing component)."""


class ResolutionError(DiracflowError):
    """Grid spacing or grid size too coarse for the requested geometry."""


class SingularityError(DiracflowError):
    """Evaluation requested at (or through) a flux-center singularity."""


class UndersamplingError(DiracflowError):
    """Contour sampling too coarse: winding rounding defect exceeded tolerance."""


class AssemblyError(DiracflowError):
    """Matrix assembly produced an operator violating its invariants."""


class ChannelTruncationError(DiracflowError):
    """Angular channel range too narrow: an extreme channel intrudes into the
    energy window.  Carries the offending |lambda|."""

    def __init__(self, message: str, offending_abs_lambda: float | None = None):
        super().__init__(message)
        self.offending_abs_lambda = offending_abs_lambda


class CalibrationError(DiracflowError):
    """No consistent wall-sign -> B-sign mapping found; abort experiments."""


class SizeError(DiracflowError):
    """Assembled operator exceeds the dimension cap."""


class ConfigError(DiracflowError):
    """Experiment config failed to parse or validate.  Carries key context."""

    def __init__(self, message: str, key_path: str | None = None):
        if key_path:
            message = f"{message} (at {key_path!r})"
        super().__init__(message)
        self.key_path = key_path


class LadderError(DiracflowError):
    """A level ladder invariant was violated after construction (defensive)."""


class InconclusiveError(DiracflowError):
    """A counting rule could not decide; diagnostics attached."""

    def __init__(self, message: str, profile=None, diagnostics: dict | None = None):
        super().__init__(message)
        self.profile = profile
        self.diagnostics = diagnostics or {}


class RefinementRequest(DiracflowError):
    """Not a failure: the adaptive loop must add samples in (t_lo, t_hi).

    Raised by ladder construction and crossing tracking when the sampled data
    cannot certify a result on a subinterval.
    """

    def __init__(self, t_lo: float, t_hi: float, reason: str = ""):
        super().__init__(f"refine ({t_lo:.6g}, {t_hi:.6g}): {reason}")
        self.t_lo = t_lo
        self.t_hi = t_hi
        self.reason = reason
