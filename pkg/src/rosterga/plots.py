"""Figure rendering for experiment reports.

Reads the aggregate CSV produced by the harness and writes one PNG per
metric: per-generation means per variant with shaded confidence bands.
The CSV stays the authoritative output; figures are a convenience view.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

FIGURE_METRICS = (
    ("mean_fitness", "Mean fitness"),
    ("max_fitness", "Max fitness"),
    ("min_soft_feasible", "Min soft penalty (feasible)"),
    ("mean_soft_feasible", "Mean soft penalty (feasible)"),
    ("min_hard", "Min hard penalty"),
    ("mean_hard", "Mean hard penalty"),
    ("num_feasible", "Feasible schedules"),
    ("num_optimal", "Optimal schedules"),
)


def _read_aggregate(path):
    series = defaultdict(lambda: defaultdict(list))
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            variant = row["variant"]
            epoch = int(row["epoch"])
            for metric, _ in FIGURE_METRICS:
                mean = row.get(f"{metric}_mean", "")
                if mean == "":
                    continue
                low = row.get(f"{metric}_ci_low", "") or mean
                high = row.get(f"{metric}_ci_high", "") or mean
                series[metric][variant].append(
                    (epoch, float(mean), float(low), float(high))
                )
    return series


def render_aggregate_figures(aggregate_csv, out_dir) -> list[Path]:
    """One PNG per metric with data; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series = _read_aggregate(aggregate_csv)
    written = []
    for metric, label in FIGURE_METRICS:
        per_variant = series.get(metric)
        if not per_variant:
            continue
        fig, ax = plt.subplots(figsize=(7.0, 4.2))
        for variant, points in sorted(per_variant.items()):
            points.sort()
            epochs = [p[0] for p in points]
            means = [p[1] for p in points]
            lows = [p[2] for p in points]
            highs = [p[3] for p in points]
            ax.plot(epochs, means, label=variant, linewidth=1.4)
            ax.fill_between(epochs, lows, highs, alpha=0.2)
        ax.set_xlabel("generation")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = out / f"{metric}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
