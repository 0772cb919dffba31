"""Neural schedule-improvement operator (protocol v1)."""

from .config import ModelConfig
from .model import GraphBatch, ShiftPredictor, load_checkpoint, save_checkpoint

__version__ = "0.1.0"

__all__ = [
    "GraphBatch",
    "ModelConfig",
    "ShiftPredictor",
    "load_checkpoint",
    "save_checkpoint",
    "__version__",
]
