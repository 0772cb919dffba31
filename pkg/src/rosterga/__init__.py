"""Staff rostering: penalty model, exact oracle, niching GA, experiment harness."""

from .model import (
    Instance,
    PenaltyReport,
    Schedule,
    ShiftCode,
    cell_penalty_scores,
    evaluate,
    fitness,
    is_optimal,
    max_fitness,
    normalized_soft,
)

__version__ = "0.1.0"

__all__ = [
    "Instance",
    "PenaltyReport",
    "Schedule",
    "ShiftCode",
    "cell_penalty_scores",
    "evaluate",
    "fitness",
    "is_optimal",
    "max_fitness",
    "normalized_soft",
    "__version__",
]
