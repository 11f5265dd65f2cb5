"""Exception and warning types shared across the package."""


class EagleblockError(Exception):
    """Base class for all package errors."""


class ZeroMatrix(EagleblockError):
    """Operation requires a nonzero matrix."""


class NotSymmetric(EagleblockError):
    """Symmetric eigendecomposition called on a non-symmetric matrix."""


class NonFinite(EagleblockError):
    """A solver update produced NaN or Inf entries (step-size misestimate)."""


class BadSpec(EagleblockError):
    """Invalid problem or experiment specification."""


class TooManyMachines(BadSpec):
    """More machines requested than columns available."""


class BadRank(BadSpec):
    """Sketch rank outside [1, n]."""


class ZeroSketchedBlock(ZeroMatrix):
    """Sketched block A S vanished; cannot form the step scale."""


class MissingMessage(EagleblockError):
    """Fusion did not receive exactly one message per machine."""


class NotNormalized(EagleblockError):
    """Worker used before the joint (A, B) normalization at setup."""


class DiagnosticsDisabled(EagleblockError):
    """Requested diagnostic was not recorded for this run."""


class SpecError(BadSpec):
    """Experiment config parse error, carries section/field context."""

    def __init__(self, message, section=None, field=None):
        ctx = ""
        if section is not None:
            ctx += f" [section {section!r}]"
        if field is not None:
            ctx += f" [field {field!r}]"
        super().__init__(message + ctx)
        self.section = section
        self.field = field


class NonConvergenceWarning(UserWarning):
    """Power iteration hit its iteration cap; best estimate returned."""


class DegenerateSpanWarning(UserWarning):
    """Shard column spans do not jointly cover the row space."""
