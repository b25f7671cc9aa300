"""Exception hierarchy shared by the model, penalty, TSP and sampler layers."""


class QuboError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(QuboError, ValueError):
    """A bit or spin vector does not match the model's variable count."""


class ModelSizeError(QuboError, ValueError):
    """An exact method was asked to work beyond its configured cap."""


class ContractError(QuboError, ValueError):
    """A documented precondition of an operation was violated."""


class InfeasibleConstraintError(QuboError, ValueError):
    """No assignment of the variables can satisfy the constraint."""


class VariableIndexError(QuboError, IndexError):
    """A variable index lies outside [0, num_vars)."""
