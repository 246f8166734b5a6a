"""Exception types for contract violations that callers are expected to catch.

Everything here derives from FreqlabError so experiment drivers can convert
any library failure into a nonzero exit status without masking real bugs.
"""


class FreqlabError(Exception):
    """Base class for all library-specific errors."""


class GridSizeError(FreqlabError):
    """Requested grid exceeds the configured size cap."""


class DegenerateDenominatorError(FreqlabError):
    """A doubling-ratio denominator underflowed (field effectively zero)."""


class AllZeroCoefficientsError(FreqlabError):
    """A series representation has no nonzero coefficient."""


class BoundaryRootError(FreqlabError):
    """A root sits on the unit circle within tolerance; factorization is ambiguous."""


class NearCircleRootError(FreqlabError):
    """A root lies too close to an integration contour."""


class QuadratureFailureError(FreqlabError):
    """A contour integral failed to settle near an integer residue."""


class BudgetViolatedError(FreqlabError):
    """A measured frequency exceeds the declared budget."""


class ResolutionError(FreqlabError):
    """Grid spacing too coarse to resolve the requested scale."""


class NormalizationError(FreqlabError):
    """A field that must be normalized is identically zero on the grid."""


class DegenerateMetricError(FreqlabError):
    """Metric determinant is nonpositive at some node."""


class UnpaddedSupportError(FreqlabError):
    """Field support touches the grid boundary; transforms need clearance."""


class ConvergenceError(FreqlabError):
    """An iterative solve hit its iteration budget before reaching tolerance."""


class StencilStabilityError(FreqlabError):
    """Drift stencil violates the M-matrix condition h * max|b| < 2."""


class MaskOverlapError(FreqlabError):
    """A test function touches the dilated critical mask."""


class ZeroLocationMismatchError(FreqlabError):
    """Supplied zero list does not absorb the singularities of log|grad u|^2."""


class ConfigError(FreqlabError):
    """Experiment configuration failed validation."""
