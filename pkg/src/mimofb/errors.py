"""Exception types shared across the package.

Everything raised deliberately by this library derives from
:class:`FeedbackSimError`, so callers can catch one base class.  The
subclasses distinguish input-validation problems from numerical ones; the
command-line interface maps them onto exit codes.
"""


class FeedbackSimError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(FeedbackSimError):
    """Operands have incompatible shapes or dimensions."""


class NonSquareError(DimensionMismatchError):
    """A square matrix (or a vector of square length) was expected."""


class NotHermitianError(FeedbackSimError):
    """A matrix required to be Hermitian is not, beyond tolerance."""


class NotPSDError(FeedbackSimError):
    """A matrix required to be positive semidefinite has a negative eigenvalue beyond tolerance."""


class NotDiagonalError(FeedbackSimError):
    """The channel covariance of a measurement matrix has off-diagonal entries beyond tolerance."""


class EfficiencyError(FeedbackSimError):
    """A detection efficiency lies outside [0, 1] beyond tolerance."""


class InvalidSquareRootError(FeedbackSimError):
    """A user-supplied noise square root B does not satisfy B'B = Z."""


class InvalidStateError(FeedbackSimError):
    """A density matrix fails its Hermiticity / positivity / trace checks."""


class StateDivergedError(FeedbackSimError):
    """A stochastic trajectory left the physical state space beyond recovery."""


class GridMismatchError(FeedbackSimError):
    """Trajectory records do not share a common time grid."""


class NegativeLagError(FeedbackSimError):
    """Correlation lags must be non-negative."""


class NoSteadyStateError(FeedbackSimError):
    """The generator does not have a unique (one-dimensional) null space."""


class ParseError(FeedbackSimError):
    """A model, state or observable file could not be parsed."""
