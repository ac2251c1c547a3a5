"""Exception hierarchy shared by every estimator in the package."""


class LDPError(Exception):
    """Base class for all errors raised by ldp_meanest."""


class DomainError(LDPError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(LDPError, ValueError):
    """Inconsistent or invalid estimator configuration."""


class InsufficientSampleError(LDPError):
    """The pool is smaller than the sample size the guarantee requires."""

    def __init__(self, message: str, required: int, available: int):
        super().__init__(message)
        self.required = required
        self.available = available


class PoolExhaustedError(LDPError):
    """Fewer unconsumed users remain than were requested."""


class OneShotViolation(LDPError):
    """A user was queried by more than one local randomizer."""


class EstimationFailure(LDPError):
    """A private estimate landed in a region where the algorithm cannot continue.

    These events occur with probability at most beta under the stated
    assumptions; they are surfaced rather than patched.
    """


class ContractError(LDPError, ValueError):
    """A caller-side contract between parameters is violated."""
