"""Exception types raised across the package."""

from __future__ import annotations


class RebalanceError(Exception):
    """Base class for all errors raised by this package."""


class DuplicateIdError(RebalanceError):
    """The id column contains repeated values."""


class UnknownColumnError(RebalanceError):
    """A named column does not exist in the table."""


class EmptyTableError(RebalanceError):
    """The input table has no data rows."""


class InvalidWeightError(RebalanceError):
    """A design or fitted weight is missing, non-positive, or non-finite."""


class KindMismatchError(RebalanceError):
    """A shared covariate is numeric on one side and categorical on the other."""


class NoCommonCovariatesError(RebalanceError):
    """Sample and target share no covariate names."""


class FormulaError(RebalanceError):
    """Formula string is malformed or references an unknown covariate."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class TransformError(RebalanceError):
    """A covariate cannot be transformed (e.g. no usable target values)."""


class EmptyTargetCellError(RebalanceError):
    """A sample stratum or margin level has zero mass in the target."""

    def __init__(self, message: str, cells: list | None = None):
        super().__init__(message)
        self.cells = cells or []


class EmptySampleCellError(RebalanceError):
    """A target stratum has no sample units to carry its weight."""

    def __init__(self, message: str, cells: list | None = None):
        super().__init__(message)
        self.cells = cells or []


class TooFewPerClassError(RebalanceError):
    """A cross-validation class has fewer members than requested folds."""


class DeBoundInfeasibleError(RebalanceError):
    """No candidate penalty satisfies the requested design-effect bound."""

    def __init__(self, message: str, smallest_deff: float):
        super().__init__(message)
        self.smallest_deff = smallest_deff


class SolverError(RebalanceError):
    """A numerical solver failed in a non-recoverable way."""


class WeightAlignmentError(RebalanceError):
    """Externally supplied weights do not align with the sample ids."""

    def __init__(self, message: str, missing: list | None = None, extra: list | None = None):
        super().__init__(message)
        self.missing = missing or []
        self.extra = extra or []


class DegenerateVariableError(RebalanceError):
    """A variable has no usable variation for the requested operation."""
