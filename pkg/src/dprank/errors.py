"""Exception types shared across the package."""


class DPRankError(Exception):
    """Base class for all errors raised by dprank."""


class InvalidInputError(DPRankError, ValueError):
    """Malformed rankings, datasets, or matrices."""


class InvalidParameterError(DPRankError, ValueError):
    """Out-of-range numeric parameter (scale, budget, kappa, ...)."""


class UnsupportedSizeError(DPRankError, ValueError):
    """Problem too large for an exhaustive routine."""


class BudgetExhaustedError(DPRankError):
    """A spend would exceed the privacy ledger's total."""


class ContractViolationError(DPRankError):
    """A pluggable component was called outside its precondition."""
