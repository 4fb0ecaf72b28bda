"""Typed errors raised by degenflow.

Every error carries the name of the module that raised it so the CLI can
record it in reports.
"""


class DegenflowError(Exception):
    """Base class for all analysis errors (CLI exit status 1)."""

    module = "degenflow"

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details


class InputError(DegenflowError):
    """Base class for I/O and configuration errors (CLI exit status 2)."""

    module = "cli"


class ConfigInvalid(InputError):
    pass


class InputParseError(InputError):
    pass


# linalg
class _LinalgError(DegenflowError):
    module = "linalg"


class NotHermitian(_LinalgError):
    pass


class AmbiguousClustering(_LinalgError):
    pass


class SingularInput(_LinalgError):
    pass


class SingularGram(_LinalgError):
    pass


class StepTooLarge(_LinalgError):
    pass


class ZeroVector(_LinalgError):
    pass


# reps
class _RepsError(DegenflowError):
    module = "reps"


class DimensionOverflow(_RepsError):
    pass


class DegenerateSpan(_RepsError):
    pass


# asymptotics
class _AsymptoticsError(DegenflowError):
    module = "asymptotics"


class NonConvergent(_AsymptoticsError):
    pass


class TooShort(_AsymptoticsError):
    pass


class SpectrumAmbiguity(_AsymptoticsError):
    pass


class NotStabilized(_AsymptoticsError):
    pass


class IntersectionDefect(_AsymptoticsError):
    pass


class RankBorderline(_AsymptoticsError):
    pass


# ringfilt
class _RingError(DegenflowError):
    module = "ringfilt"


class DegreeOverflow(_RingError):
    pass


class IrrationalFiltration(_RingError):
    pass


class TieDetected(_RingError):
    pass


# futaki
class _FutakiError(DegenflowError):
    module = "futaki"


class NotFullDimensional(_FutakiError):
    pass


class UnstableExtrapolation(_FutakiError):
    pass


class NoConvergence(_FutakiError):
    pass


class NonConvexHessian(_FutakiError):
    pass


# flows
class _FlowsError(DegenflowError):
    module = "flows"


class StepUnstable(_FlowsError):
    pass


class DegenerateMetric(_FlowsError):
    pass


class QuadratureNotConverged(_FlowsError):
    pass
