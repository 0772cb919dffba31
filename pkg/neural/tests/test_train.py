"""Training loop: overfitting capacity and early-stopping mechanics."""

import pytest

from shiftgnn.config import ModelConfig
from shiftgnn.data import load_split
from shiftgnn.train import train


def test_overfits_small_dataset(overfit_dataset_dir, tmp_path):
    result = train(
        overfit_dataset_dir,
        ModelConfig(),
        seed=0,
        out_path=tmp_path / "model.pt",
        max_epochs=200,
        early_stopping=False,
    )
    assert len(result.history) == 200
    assert result.final_train_ce < 0.1


def test_early_stopping_stops_within_patience(train_dataset_dir, tmp_path):
    config = ModelConfig(patience=5, nb_layers_conv=2, nb_layers_mlp=2,
                         nb_heads=4, hidden_dim=32)
    result = train(
        train_dataset_dir,
        config,
        seed=1,
        out_path=tmp_path / "model.pt",
        max_epochs=60,
    )
    stopped_at = result.history[-1].epoch
    assert stopped_at <= result.best_epoch + config.patience
    # validation stats recorded each epoch
    assert all(log.validation is not None for log in result.history)
    for log in result.history:
        v = log.validation
        assert v.frac_unfeasible + v.frac_optimal + v.frac_feasible_suboptimal == pytest.approx(1.0)


def test_empty_dataset_rejected(tmp_path):
    data_dir = tmp_path / "empty"
    data_dir.mkdir()
    (data_dir / "manifest.json").write_text(
        '{"instances": {}, "splits": {"train": "train.jsonl", '
        '"valid": "valid.jsonl", "test": "test.jsonl"}}'
    )
    for name in ("train.jsonl", "valid.jsonl", "test.jsonl"):
        (data_dir / name).write_text("")
    with pytest.raises(ValueError, match="empty"):
        train(data_dir, ModelConfig(), seed=0, out_path=tmp_path / "m.pt")


def test_split_loading_round_trip(train_dataset_dir):
    records = load_split(train_dataset_dir, "train")
    assert records
    rec = records[0]
    E, D = rec.meta["employees"], rec.meta["days"]
    assert rec.meta["feature_dim"] == 17
    assert len(rec.target) == E and len(rec.target[0]) == D
    assert len(rec.graph["shift_feats"]) == E * D
    assert rec.kind in ("unfeasible_to_feasible", "feasible_to_optimal")
