"""Exception types shared across the package."""


class PivotgpError(Exception):
    """Base class for errors raised by this package."""


class NumericalError(PivotgpError):
    """Base class for numerical failures (breakdown, divergence, singularity)."""


class PivotBreakdown(NumericalError):
    """The selected pivot's residual variance fell below the rank tolerance.

    The matrix is numerically rank deficient at ``rank``; the partial factor
    computed so far is still valid and may be accepted by the caller.
    """

    def __init__(self, rank, pivot_value, tolerance):
        self.rank = rank
        self.pivot_value = pivot_value
        self.tolerance = tolerance
        super().__init__(
            f"pivot breakdown at rank {rank}: residual diagonal "
            f"{pivot_value:.3e} <= tolerance {tolerance:.3e}"
        )


class NumericalDivergence(NumericalError):
    """A solver recurrence produced a non-finite value."""

    def __init__(self, iteration, detail=""):
        self.iteration = iteration
        msg = f"non-finite value in iteration {iteration}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class SingularSystem(NumericalError):
    """A dense linear system remained singular after the jitter retry."""


class AssumptionViolated(PivotgpError):
    """A matrix assumption (nonnegative entries, constant diagonal) failed."""

    def __init__(self, row, col, detail=""):
        self.row = row
        self.col = col
        msg = f"matrix assumption violated at entry ({row}, {col})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class DataError(PivotgpError):
    """Dataset ingestion or generation failed (bad file, degenerate column)."""
