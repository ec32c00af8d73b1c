"""Exception and warning types shared across the package."""


class RandodeError(Exception):
    """Base class for all randode errors."""


class SpecificationError(RandodeError):
    """Invalid parameters, configuration, or preconditions."""


class UnsupportedOperationError(RandodeError):
    """Operation not defined for the given object (e.g. density of a discrete law)."""


class BudgetError(RandodeError):
    """A configured resource budget (e.g. symbolic term count) was exceeded."""


class EstimationError(RandodeError):
    """A Monte Carlo estimate could not be formed (e.g. every sample degenerate)."""


class NumericalConsistencyError(RandodeError):
    """A numerical result violates a mathematical invariant beyond tolerance."""


class GridCoverageError(RandodeError):
    """Evaluation grid too narrow: too much probability mass falls outside it."""


class InsufficientDataError(RandodeError):
    """Not enough usable data points for a fit or summary."""


class UnboundedCoefficientWarning(UserWarning):
    """A series coefficient law has unbounded support; convergence is not guaranteed."""


class DegenerateSamplesWarning(UserWarning):
    """The fraction of near-zero denominators exceeded the configured threshold."""


class ControlVariateFallbackWarning(UserWarning):
    """Control variate degenerated (zero variance); estimator fell back to crude."""
