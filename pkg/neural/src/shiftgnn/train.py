"""Training with validation-driven early stopping.

The loss is cross entropy between predicted class distributions and target
shift codes over all shift nodes.  Validation tracks the fraction of
unfeasible minus optimal predictions (scored by the primary toolkit); on
exact ties the mean squared gap between feasible-suboptimal objective
values and the certified optimum breaks them.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .config import ModelConfig
from .data import GraphRecord, evaluate_schedules, load_split
from .model import GraphBatch, ShiftPredictor, save_checkpoint


@dataclass
class ValidationStats:
    frac_unfeasible: float
    frac_optimal: float
    frac_feasible_suboptimal: float
    mse_suboptimal_vs_optimal: float

    @property
    def early_stop_metric(self) -> float:
        return self.frac_unfeasible - self.frac_optimal


@dataclass
class EpochLog:
    epoch: int
    train_ce: float
    validation: ValidationStats | None


@dataclass
class TrainResult:
    checkpoint_path: str
    best_epoch: int
    history: list[EpochLog]
    final_train_ce: float


def _make_batches(records: list[GraphRecord], batch_size: int, rng: np.random.Generator):
    order = rng.permutation(len(records))
    for start in range(0, len(records), batch_size):
        chunk = [records[i] for i in order[start : start + batch_size]]
        batch = GraphBatch([r.graph for r in chunk], [r.meta for r in chunk])
        targets = torch.tensor(
            np.concatenate([np.asarray(r.target).reshape(-1) for r in chunk]),
            dtype=torch.long,
        )
        yield batch, targets


def compute_validation_stats(model: ShiftPredictor, records, manifest_path) -> ValidationStats:
    model.eval()
    batch = GraphBatch([r.graph for r in records], [r.meta for r in records])
    predicted = model.predict_schedules(batch)
    scored = evaluate_schedules(
        manifest_path, [(r.instance_id, p) for r, p in zip(records, predicted)]
    )
    n = len(scored)
    unfeasible = sum(1 for s in scored if not s["feasible"])
    optimal = sum(1 for s in scored if s["is_optimal"])
    gaps = [
        (s["soft_unnormalized"] - s["reference_min_soft"]) ** 2
        for s in scored
        if s["feasible"] and not s["is_optimal"]
    ]
    return ValidationStats(
        frac_unfeasible=unfeasible / n,
        frac_optimal=optimal / n,
        frac_feasible_suboptimal=(n - unfeasible - optimal) / n,
        mse_suboptimal_vs_optimal=float(np.mean(gaps)) if gaps else 0.0,
    )


def train(
    data_dir,
    config: ModelConfig,
    seed: int,
    out_path,
    max_epochs: int = 500,
    early_stopping: bool = True,
) -> TrainResult:
    """Train on a dataset directory and write the best checkpoint."""
    data_dir = Path(data_dir)
    train_records = load_split(data_dir, "train")
    if not train_records:
        raise ValueError("training split is empty")
    valid_records = load_split(data_dir, "valid") if early_stopping else []
    if early_stopping and not valid_records:
        raise ValueError("validation split is empty but early stopping is on")
    manifest_path = data_dir / "manifest.json"

    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    model = ShiftPredictor(config)
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=config.lr, weight_decay=config.weight_decay
    )
    loss_fn = nn.CrossEntropyLoss()

    best_metric: tuple[float, float] | None = None
    best_state = copy.deepcopy(model.state_dict())
    best_epoch = 0
    stale = 0
    history: list[EpochLog] = []
    final_ce = float("nan")

    for epoch in range(max_epochs):
        model.train()
        total_loss = 0.0
        total_nodes = 0
        for batch, targets in _make_batches(train_records, config.batch_size, rng):
            optimizer.zero_grad()
            logits = model.logits(batch)
            loss = loss_fn(logits, targets)
            loss.backward()
            optimizer.step()
            total_loss += float(loss.detach()) * len(targets)
            total_nodes += len(targets)
        final_ce = total_loss / total_nodes

        stats = None
        if early_stopping:
            stats = compute_validation_stats(model, valid_records, manifest_path)
            metric = (stats.early_stop_metric, stats.mse_suboptimal_vs_optimal)
            improved = best_metric is None or (
                metric[0] < best_metric[0]
                or (metric[0] == best_metric[0] and metric[1] < best_metric[1])
            )
            if improved:
                best_metric = metric
                best_state = copy.deepcopy(model.state_dict())
                best_epoch = epoch
                stale = 0
            else:
                stale += 1
        history.append(EpochLog(epoch=epoch, train_ce=final_ce, validation=stats))
        if early_stopping and stale >= config.patience:
            break

    if not early_stopping:
        best_state = model.state_dict()
        best_epoch = len(history) - 1
    model.load_state_dict(best_state)
    model.eval()
    save_checkpoint(model, out_path)
    return TrainResult(
        checkpoint_path=str(out_path),
        best_epoch=best_epoch,
        history=history,
        final_train_ce=final_ce,
    )
