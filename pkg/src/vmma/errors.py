"""Exception and warning types shared across the package.

Two failure families matter to callers (and map onto CLI exit codes):
validation problems with the requested computation (bad parameters, unusable
combinations — exit code 2) and numeric failures inside an otherwise valid
computation (quadrature that will not converge, an embedding that is not
nonnegative definite, a covariance block that will not factor — exit code 3).
"""


class VmmaError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(VmmaError, ValueError):
    """A parameter or parameter combination is outside the supported domain."""


class NumericError(VmmaError, RuntimeError):
    """A numeric procedure failed to reach its contract."""


class QuadratureError(NumericError):
    """Adaptive quadrature did not converge within its budget."""


class EmbeddingError(NumericError):
    """Circulant embedding stayed indefinite after all padding retries."""


class NotPositiveDefiniteError(NumericError):
    """A covariance block failed Cholesky factorization even after jitter."""


class DegenerateDataError(NumericError):
    """Input data is degenerate for the requested statistic.

    Example: a grid whose lag-1 square increments all vanish (any affine
    surface) carries no roughness information, so the dimension estimator
    has no defined value.  Studies catch this, skip the replicate, and
    report the skip count.
    """


class RateHypothesisWarning(UserWarning):
    """The truncation-growth exponent violates the convergence hypothesis.

    Simulation and error analysis still run — the scheme is well defined for
    any gamma > 0 — but the asymptotic error guarantee no longer applies.
    """
