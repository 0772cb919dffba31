"""Exception types shared across the package."""


class RosteringError(Exception):
    """Base class for all package errors."""


class InvalidInputError(RosteringError):
    """Malformed or dimensionally inconsistent input."""


class ConfigurationError(RosteringError):
    """Operation invoked without the configuration it requires."""


class CapacityError(RosteringError):
    """Problem size exceeds what an exact routine can enumerate."""


class GenerationExhaustedError(RosteringError):
    """Random generation failed to produce the requested output within budget."""


class InfeasibleInstanceError(RosteringError):
    """Instance admits no feasible schedule."""


class InvalidSolutionError(RosteringError):
    """Imported solver solution is not a feasible schedule."""


class OperatorFailureError(RosteringError):
    """Improvement operator failed; carries the GA epoch when known."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class DegenerateSampleError(RosteringError):
    """Statistical routine received a sample it cannot handle."""


class ContractViolationError(RosteringError):
    """An internal invariant guaranteed by the model was broken."""
