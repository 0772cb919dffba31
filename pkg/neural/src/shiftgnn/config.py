"""Model and training configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass
class ModelConfig:
    """Defaults are the best tuned configuration; hidden_dim is fixed at 64."""

    nb_layers_conv: int = 4
    nb_layers_mlp: int = 4
    nb_heads: int = 8
    dropout_conv: float = 0.0
    dropout_mlp: float = 0.0
    hidden_dim: int = 64
    lr: float = 0.001
    weight_decay: float = 0.0001
    batch_size: int = 64
    patience: int = 30

    def __post_init__(self):
        if self.hidden_dim % self.nb_heads != 0:
            raise ValueError("hidden_dim must be divisible by nb_heads")
        for name in ("nb_layers_conv", "nb_layers_mlp", "nb_heads", "hidden_dim",
                     "batch_size", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("dropout_conv", "dropout_mlp"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**data)
