"""Exception hierarchy shared across the package."""


class MEJumpError(Exception):
    """Base class for all model and construction errors."""


class NotADensityError(MEJumpError):
    """The triple (alpha, T, s) does not integrate to one, or the density
    evaluates materially negative."""


class UnstableTError(MEJumpError):
    """The dominant eigenvalue of T is not strictly negative."""


class PositiveDiagonalError(MEJumpError):
    """T has a positive diagonal entry, so the elementwise sign split cannot
    reconstruct T and the jump construction is unavailable."""


class ZeroAlphaError(MEJumpError):
    """alpha is the zero vector; no initial distribution can be built."""


class LambdaTooSmallError(MEJumpError):
    """Tilting rate too small: below the subintensity threshold lambda_0, or
    at or below the dominant eigenvalue where the transform diverges."""


class NotTransientError(MEJumpError):
    """The doubled transient states are not left almost surely at this tilting
    rate; exit-time quantities are undefined."""


class SingularMatrixError(MEJumpError):
    """Linear system is singular or numerically rank-deficient."""


class EigenConvergenceError(MEJumpError):
    """The eigenvalue iteration failed to converge."""
