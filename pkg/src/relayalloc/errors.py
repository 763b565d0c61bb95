"""Exception types shared across the package.

The CLI maps these onto process exit codes; library users can catch the
common base class.
"""


class RelayAllocError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(RelayAllocError, ValueError):
    """A caller-supplied argument is out of contract (CLI exit code 2)."""


class InfeasibleProblemError(RelayAllocError):
    """The outage target cannot be met even at the power caps (exit code 3)."""


class SchemaError(RelayAllocError):
    """A persisted file has the wrong format or version (exit code 4)."""


class InvariantViolationError(RelayAllocError):
    """A persisted file parses but violates a documented invariant (exit code 4)."""


class BudgetExceededError(RelayAllocError):
    """The solver's evaluation cap was hit before reaching the target resolution."""


class NonFiniteLossError(RelayAllocError):
    """Training produced a non-finite loss (exit code 5)."""

    def __init__(self, message, epoch=None, batch_index=None, loss=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch_index = batch_index
        self.loss = loss


class NumericConsistencyError(RelayAllocError):
    """An internal numeric sanity check failed, e.g. a probability escaped
    [0, 1] by more than the documented tolerance (exit code 5)."""
