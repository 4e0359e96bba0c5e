"""Exception hierarchy shared by all gipeps modules."""


class GipepsError(Exception):
    """Base class for all package errors."""


class ShapeError(GipepsError):
    """Leg extents incompatible with the requested operation."""


class LabelError(GipepsError):
    """Unknown, repeated, or non-permutation leg names."""


class NonConvergence(GipepsError):
    """Power iteration hit max_iter before the eigenvalue settled."""

    def __init__(self, message, value=None, residual=None, iterations=None):
        super().__init__(message)
        self.value = value
        self.residual = residual
        self.iterations = iterations


class ZeroOperator(GipepsError):
    """Applied vector norm underflowed; the operator annihilates the iterate."""


class ChargeError(GipepsError):
    """Charge outside {0, 1} or projection on an incompatible leg."""


class RegionError(GipepsError):
    """Region placement violates lattice constraints."""


class LimitError(GipepsError):
    """Combinatorial enumeration beyond the configured cap."""


class CapExceeded(GipepsError):
    """Problem size beyond a configured resource cap."""


class BlockLeakage(GipepsError):
    """Off-block RDM coherence above tolerance; geometry or labeling bug."""


class GeometryError(GipepsError):
    """Geometry does not satisfy an operation's structural assumptions."""


class ConfigError(GipepsError):
    """Invalid experiment configuration; message names the offending field."""
