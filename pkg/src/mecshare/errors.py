"""Exception types shared across the solver modules."""


class InvalidParameters(ValueError):
    """Market constants violate the validity rules of :class:`MarketParams`."""


class InfeasibleEta(ValueError):
    """Revenue-sharing ratio below the feasibility bound s/p (or above 1)."""


class NumericalFailure(RuntimeError):
    """A bracketing root search found no sign change where one must exist."""


class InvalidTolerance(ValueError):
    """Search tolerance outside the accepted range."""
