"""Command-line interface: train, serve, tune."""

from __future__ import annotations

import json
from pathlib import Path

import click

from .config import ModelConfig
from .model import load_checkpoint
from .server import serve
from .train import train
from .tune import random_search


@click.group()
def main():
    """Neural schedule-improvement operator."""


@main.command("train")
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--max-epochs", type=int, default=500, show_default=True)
@click.option("--early-stopping/--no-early-stopping", default=True, show_default=True)
def train_cmd(data_dir, config_path, seed, out_path, max_epochs, early_stopping):
    """Train on a dataset directory; writes the best checkpoint."""
    config = ModelConfig()
    if config_path:
        config = ModelConfig.from_dict(json.loads(Path(config_path).read_text()))
    result = train(
        data_dir, config, seed=seed, out_path=out_path,
        max_epochs=max_epochs, early_stopping=early_stopping,
    )
    click.echo(
        f"trained {len(result.history)} epochs, best at {result.best_epoch}, "
        f"final train CE {result.final_train_ce:.4f}"
    )


@main.command("serve")
@click.option("--ckpt", "ckpt_path", type=click.Path(exists=True), required=True)
@click.option("--listen", default="127.0.0.1:7777", show_default=True)
def serve_cmd(ckpt_path, listen):
    """Serve a checkpoint over the JSON-lines protocol."""
    host, _, port = listen.rpartition(":")
    model = load_checkpoint(ckpt_path)

    def announce(actual_port):
        click.echo(f"listening on {host}:{actual_port}", err=True)

    serve(model, host, int(port), ready_callback=announce)


@main.command("tune")
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--space", "space_path", type=click.Path(exists=True), default=None,
              help="JSON subset of the search grid.")
@click.option("--trials", type=int, required=True)
@click.option("--repeats", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-epochs", type=int, default=200, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def tune_cmd(data_dir, space_path, trials, repeats, seed, max_epochs, out_path):
    """Random-search tuning; prints ranked configurations."""
    space = json.loads(Path(space_path).read_text()) if space_path else None
    results = random_search(
        data_dir, trials=trials, repeats=repeats, seed=seed,
        space=space, max_epochs=max_epochs,
    )
    ranked = [
        {"config": r.config.to_dict(), "mean_test_metric": r.mean_test_metric,
         "per_repeat": r.per_repeat}
        for r in results
    ]
    text = json.dumps(ranked, indent=1)
    if out_path:
        Path(out_path).write_text(text + "\n")
    click.echo(text)


if __name__ == "__main__":
    main()
