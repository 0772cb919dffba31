"""Random-search hyper-parameter tuning over the fixed grid."""

from __future__ import annotations

import itertools
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .data import load_split
from .model import load_checkpoint
from .train import compute_validation_stats, train

SEARCH_SPACE = {
    "batch_size": (64, 128, 256),
    "lr": (0.01, 0.001),
    "weight_decay": (0.001, 0.0001),
    "dropout_conv": (0.0, 0.1, 0.2),
    "dropout_mlp": (0.0, 0.1, 0.2),
    "nb_layers_conv": (3, 4),
    "nb_layers_mlp": (3, 4, 5),
    "nb_heads": (4, 8),
    "patience": (20, 30, 40),
}


@dataclass
class TrialResult:
    config: ModelConfig
    mean_test_metric: float
    per_repeat: list[float]


def enumerate_space(space: dict | None = None) -> list[dict]:
    space = space or SEARCH_SPACE
    unknown = set(space) - set(SEARCH_SPACE)
    if unknown:
        raise ValueError(f"unknown hyper-parameters: {sorted(unknown)}")
    for key, values in space.items():
        bad = [v for v in values if v not in SEARCH_SPACE[key]]
        if bad:
            raise ValueError(f"{key} values {bad} lie outside the search grid")
    keys = sorted(space)
    combos = []
    for values in itertools.product(*(space[k] for k in keys)):
        combos.append(dict(zip(keys, values)))
    return combos


def random_search(
    data_dir,
    trials: int,
    repeats: int,
    seed: int,
    space: dict | None = None,
    max_epochs: int = 200,
) -> list[TrialResult]:
    """Sample configs without replacement, train each `repeats` times,
    rank by the mean test-split early-stopping metric (ascending)."""
    combos = enumerate_space(space)
    if trials > len(combos):
        raise ValueError(f"trials {trials} exceeds the space size {len(combos)}")
    if repeats < 1:
        raise ValueError("repeats must be positive")
    rng = np.random.default_rng(seed)
    picked = [combos[i] for i in rng.choice(len(combos), size=trials, replace=False)]

    data_dir = Path(data_dir)
    test_records = load_split(data_dir, "test")
    manifest_path = data_dir / "manifest.json"
    results = []
    for combo in picked:
        config = ModelConfig(**combo)
        metrics = []
        for r in range(repeats):
            with tempfile.TemporaryDirectory() as tmp:
                ckpt = Path(tmp) / "model.pt"
                train(
                    data_dir,
                    config,
                    seed=int(rng.integers(2**31)),
                    out_path=ckpt,
                    max_epochs=max_epochs,
                )
                model = load_checkpoint(ckpt)
                stats = compute_validation_stats(model, test_records, manifest_path)
                metrics.append(stats.early_stop_metric)
        results.append(
            TrialResult(
                config=config,
                mean_test_metric=float(np.mean(metrics)),
                per_repeat=metrics,
            )
        )
    results.sort(key=lambda t: t.mean_test_metric)
    return results
