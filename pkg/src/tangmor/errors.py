"""Exception and warning types shared across the toolkit."""


class TangmorError(Exception):
    """Base class for all toolkit errors."""


class SingularShiftError(TangmorError):
    """The shifted matrix is exactly or numerically singular.

    Carries the offending shift in ``sigma``.
    """

    def __init__(self, sigma, detail=""):
        self.sigma = sigma
        msg = f"shifted matrix is singular at sigma = {sigma}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class SingularMassError(TangmorError):
    """The mass matrix of a second-order system is numerically singular."""


class BreakdownError(TangmorError):
    """Loss of invertibility in the two-sided recurrence.

    Raised when the smallest singular value of the block overlap falls
    below the breakdown tolerance; look-ahead recovery is not attempted.
    """

    def __init__(self, iteration, smin, detail=""):
        self.iteration = iteration
        self.smin = smin
        msg = (f"serious breakdown at iteration {iteration}: "
               f"smallest overlap singular value {smin:.3e}")
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class StructureLossError(TangmorError):
    """The half-basis coupling needed for a second-order reduced model is singular."""


class DegenerateResidualError(TangmorError):
    """The residual matrix is numerically zero; the expansion has converged."""


class MatrixMarketError(TangmorError):
    """A Matrix Market file failed to parse or has an unsupported layout."""

    def __init__(self, path, message, line=None):
        self.path = path
        self.line = line
        loc = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{loc}: {message}")


class DeflationWarning(UserWarning):
    """A new block was rank deficient and its width was shrunk."""
