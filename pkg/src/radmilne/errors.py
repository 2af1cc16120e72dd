"""Exception types shared by the solver modules."""


class ContractViolationError(ValueError):
    """An input violates a documented precondition (bad grid, negative data,
    out-of-range parameter, mismatched shapes)."""


class IterationFailureError(RuntimeError):
    """An iterative solve did not reach its tolerance within max_iter.

    Carries the last residual (or increment) and, when available, the
    measured per-iteration ratios so the failure can be diagnosed.
    """

    def __init__(self, message, residual=None, ratios=None):
        super().__init__(message)
        self.residual = residual
        self.ratios = list(ratios) if ratios is not None else None
