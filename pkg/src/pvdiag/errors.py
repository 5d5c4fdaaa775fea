"""Exception types shared across the simulation, preprocessing and training stages."""


class PvDiagError(Exception):
    """Base class for all package-specific errors."""


class NonPositivePhotocurrent(PvDiagError):
    """Open-circuit voltage is undefined when the photocurrent is zero or negative."""


class ConvergenceFailure(PvDiagError):
    """A nonlinear solve exhausted its iteration budget without meeting tolerance."""


class EmptyEnvSeries(PvDiagError):
    """No usable environment records remain after filtering."""


class MalformedEnvRow(PvDiagError):
    """An environment CSV row could not be parsed; the message carries the line number."""


class IdealBelowMeasured(PvDiagError):
    """The ideal axis limit falls below the measured curve extreme by more than tolerance."""


class DegenerateRange(PvDiagError):
    """Per-curve normalization is impossible because max equals min."""


class OutOfRangeInput(PvDiagError):
    """Input values lie outside the normalized range beyond tolerance."""


class ZeroIrradiance(PvDiagError):
    """Curve correction requires a nonzero source irradiance."""


class NoVocCrossing(PvDiagError):
    """The curve never crosses zero current, so Voc cannot be read off it."""


class LengthMismatch(PvDiagError):
    """Paired curves must be sampled at the same number of points."""


class ShapeMismatch(PvDiagError):
    """Tensor shapes are inconsistent with the layer or network contract."""


class NonFiniteLoss(PvDiagError):
    """Training produced a non-finite loss value."""


class EmptyTestSet(PvDiagError):
    """Evaluation needs at least one labelled sample."""


class ClassTooSmall(PvDiagError):
    """A class has too few samples to populate every split."""


class InvalidConfig(PvDiagError):
    """Run configuration is missing a field or holds an unusable value."""
