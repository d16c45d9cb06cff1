"""Exception types shared across the package."""


class UapLabError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(UapLabError):
    """Vectors or model/input dimensions do not agree."""


class ZeroVector(UapLabError):
    """A zero-norm vector was passed where a direction is required."""


class UnsupportedArchitecture(UapLabError):
    """Unknown architecture name or invalid architecture parameters."""


class UnsupportedKind(UapLabError):
    """Unknown synthetic dataset kind."""


class Divergence(UapLabError):
    """Training loss became non-finite."""


class FormatError(UapLabError):
    """A serialized file is truncated, malformed, or version-incompatible."""


class NoCandidates(UapLabError):
    """Every candidate boundary direction was degenerate."""


class ZeroReference(UapLabError):
    """Max-cosine solver called with a zero reference perturbation."""


class EmptyDataset(UapLabError):
    """An operation requires at least one sample."""


class NoProgress(UapLabError):
    """A full generation pass produced no successful attack at zero fooling rate."""


class EmptyRoster(UapLabError):
    """The experiment roster has no models."""
