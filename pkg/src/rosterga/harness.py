"""Batch experiment harness: run grids, aggregate, compare, report.

A grid cell is one (variant, instance, run) GA execution with a seed
derived from the experiment base seed.  Reports comprise per-run trace
CSVs, a per-generation aggregate CSV with confidence intervals, a summary
table (JSON + CSV) with Welch comparisons for configured variant pairs,
and optional per-metric figures.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DegenerateSampleError, InvalidInputError
from .ga import GaConfig, GenerationRecord, RunTrace, read_trace_csv, run, write_trace_csv
from .improve import identity_operator, neural_operator, repair_operator
from .io import load_instance
from .stats import confidence_interval, welch_t_test

IMPROVER_KINDS = ("none", "repair", "neural")

AGGREGATE_METRICS = (
    "mean_fitness",
    "max_fitness",
    "min_soft_feasible",
    "mean_soft_feasible",
    "min_hard",
    "mean_hard",
    "num_feasible",
    "num_optimal",
    "mean_crowding",
    "max_crowding",
)

# Summary rows mirror the per-window record fields plus two per-run scalars.
SUMMARY_METRICS = (
    ("fitness_mean", "mean_fitness"),
    ("fitness_max", "max_fitness"),
    ("soft_penalty_min", "min_soft_feasible"),
    ("soft_penalty_mean", "mean_soft_feasible"),
    ("hard_penalty_min", "min_hard"),
    ("hard_penalty_mean", "mean_hard"),
    ("num_feasible_mean", "num_feasible"),
    ("num_optimal_mean", "num_optimal"),
    ("crowding_mean", "mean_crowding"),
    ("crowding_max", "max_crowding"),
    ("total_time_seconds", "_total_seconds"),
    ("stop_generation", "_stop_epoch"),
)


@dataclass
class VariantSpec:
    name: str
    ga: dict
    improver: str = "none"
    neural_endpoint: str | None = None
    timebox_from: str | None = None

    def __post_init__(self):
        if self.improver not in IMPROVER_KINDS:
            raise InvalidInputError(f"unknown improver kind {self.improver!r}")
        if self.improver == "neural" and not self.neural_endpoint:
            raise InvalidInputError(f"variant {self.name}: neural improver needs an endpoint")


@dataclass
class ExperimentConfig:
    instances: list[str]
    variants: list[VariantSpec]
    runs_per_instance: int = 10
    base_seed: int = 0
    pairs: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        if self.runs_per_instance < 1:
            raise InvalidInputError("runs_per_instance must be positive")
        names = [v.name for v in self.variants]
        if len(set(names)) != len(names):
            raise InvalidInputError("variant names must be unique")
        for v in self.variants:
            if v.timebox_from is not None and v.timebox_from not in names:
                raise ConfigurationError(
                    f"variant {v.name} timeboxes from unknown variant {v.timebox_from}"
                )
        for a, b in self.pairs:
            if a not in names or b not in names:
                raise InvalidInputError(f"comparison pair ({a}, {b}) names unknown variants")


def load_experiment_config(path) -> ExperimentConfig:
    data = json.loads(Path(path).read_text())
    variants = [VariantSpec(**v) for v in data["variants"]]
    return ExperimentConfig(
        instances=data["instances"],
        variants=variants,
        runs_per_instance=data.get("runs_per_instance", 10),
        base_seed=data.get("base_seed", 0),
        pairs=[tuple(p) for p in data.get("pairs", [])],
    )


def derive_seed(base_seed: int, variant: str, instance: str, run_index: int) -> int:
    digest = hashlib.sha256(f"{variant}|{instance}|{run_index}".encode()).digest()
    return (base_seed ^ int.from_bytes(digest[:8], "big")) & (2**63 - 1)


def aggregate_best_window(trace: RunTrace | list[GenerationRecord], window: int = 1000) -> GenerationRecord:
    """The record with the best max_fitness among the final `window` records."""
    records = trace.records if isinstance(trace, RunTrace) else trace
    if not records:
        raise InvalidInputError("trace is empty")
    tail = records[-window:] if window < len(records) else records
    best = tail[0]
    for rec in tail[1:]:
        if rec.max_fitness > best.max_fitness:
            best = rec
    return best


def _build_improver(spec: VariantSpec):
    if spec.improver == "none":
        return identity_operator()
    if spec.improver == "repair":
        return repair_operator()
    return neural_operator(spec.neural_endpoint)


def _run_cell(args):
    instance_path, spec_dict, run_index, seed, wall_cap, trace_path, summary_path = args
    spec = VariantSpec(**spec_dict)
    instance = load_instance(instance_path)
    ga_kwargs = dict(spec.ga)
    ga_kwargs["seed"] = seed
    if wall_cap is not None:
        ga_kwargs["max_wall_seconds"] = wall_cap
    ga_kwargs["use_improver"] = spec.improver != "none"
    cfg = GaConfig(**ga_kwargs)
    improver = _build_improver(spec)
    try:
        trace = run(instance, cfg, improver=improver)
    finally:
        improver.close()
    Path(trace_path).parent.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace.records, trace_path)
    summary = {
        "variant": spec.name,
        "instance": Path(instance_path).stem,
        "run_index": run_index,
        "seed": seed,
        "stop_epoch": trace.stop_epoch,
        "total_seconds": trace.total_seconds,
        "best_fitness": trace.best_fitness,
        "first_optimal_epoch": trace.first_optimal_epoch,
        "reached_optimal": trace.reached_optimal,
    }
    Path(summary_path).write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return summary


def run_experiment(cfg: ExperimentConfig, out_dir, workers: int = 1) -> dict:
    """Execute the full grid and assemble reports; returns the summary dict."""
    out = Path(out_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)

    seeds = {}
    for spec in cfg.variants:
        for inst_path in cfg.instances:
            stem = Path(inst_path).stem
            for r in range(cfg.runs_per_instance):
                seeds[(spec.name, stem, r)] = derive_seed(
                    cfg.base_seed, spec.name, stem, r
                )
    if len(set(seeds.values())) != len(seeds):
        raise ConfigurationError("derived seeds collide; change base_seed")

    def cell_paths(variant, stem, r):
        base = out / "traces" / variant / stem
        return base / f"run{r:03d}.csv", base / f"run{r:03d}.json"

    phase1 = [v for v in cfg.variants if v.timebox_from is None]
    phase2 = [v for v in cfg.variants if v.timebox_from is not None]
    run_times: dict[tuple[str, str, int], float] = {}

    def submit_phase(variants, wall_caps):
        jobs = []
        for spec in variants:
            for inst_path in cfg.instances:
                stem = Path(inst_path).stem
                for r in range(cfg.runs_per_instance):
                    trace_path, summary_path = cell_paths(spec.name, stem, r)
                    cap = wall_caps.get((spec.name, stem, r)) if wall_caps else None
                    jobs.append(
                        (
                            inst_path,
                            spec.__dict__,
                            r,
                            seeds[(spec.name, stem, r)],
                            cap,
                            str(trace_path),
                            str(summary_path),
                        )
                    )
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_cell, jobs))
        else:
            results = [_run_cell(job) for job in jobs]
        return results

    results = submit_phase(phase1, None)
    for summary in results:
        key = (summary["variant"], summary["instance"], summary["run_index"])
        run_times[key] = summary["total_seconds"]

    caps = {}
    for spec in phase2:
        for inst_path in cfg.instances:
            stem = Path(inst_path).stem
            for r in range(cfg.runs_per_instance):
                source = (spec.timebox_from, stem, r)
                if source not in run_times:
                    raise ConfigurationError(
                        f"variant {spec.name}: no completed {spec.timebox_from} run "
                        f"for instance {stem} run {r}"
                    )
                caps[(spec.name, stem, r)] = run_times[source]
    if phase2:
        submit_phase(phase2, caps)

    return assemble_report(out, [v.name for v in cfg.variants], cfg.pairs, out)


def _load_runs(runs_dir: Path):
    """{variant: [(records, summary), ...]} from a traces directory."""
    out: dict[str, list] = {}
    traces_root = runs_dir / "traces" if (runs_dir / "traces").is_dir() else runs_dir
    for variant_dir in sorted(p for p in traces_root.iterdir() if p.is_dir()):
        runs = []
        for csv_path in sorted(variant_dir.glob("*/run*.csv")):
            summary_path = csv_path.with_suffix(".json")
            records = read_trace_csv(csv_path)
            summary = json.loads(summary_path.read_text())
            runs.append((records, summary))
        if runs:
            out[variant_dir.name] = runs
    return out


def _metric_values(runs, metric_key):
    values = []
    for records, summary in runs:
        if metric_key == "_total_seconds":
            values.append(summary["total_seconds"])
        elif metric_key == "_stop_epoch":
            values.append(summary["stop_epoch"])
        else:
            best = aggregate_best_window(records)
            values.append(getattr(best, metric_key))
    return [v for v in values if v is not None]


def assemble_report(runs_dir, variant_names, pairs, out_dir) -> dict:
    """Aggregate CSV, summary JSON/CSV, and Welch comparisons."""
    runs_dir = Path(runs_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_variant = _load_runs(runs_dir)
    missing = [v for v in variant_names if v not in by_variant]
    if missing:
        raise ConfigurationError(f"no runs found for variants: {missing}")

    _write_aggregate_csv(by_variant, variant_names, out / "aggregate.csv")

    summary: dict = {"variants": variant_names, "metrics": {}, "comparisons": []}
    for metric_name, metric_key in SUMMARY_METRICS:
        row = {}
        for variant in variant_names:
            values = _metric_values(by_variant[variant], metric_key)
            if values:
                row[variant] = {
                    "mean": float(np.mean(values)),
                    "std": float(np.std(values, ddof=1)) if len(values) > 1 else 0.0,
                    "n": len(values),
                }
            else:
                row[variant] = None
        summary["metrics"][metric_name] = row

    for a, b in pairs:
        for metric_name, metric_key in SUMMARY_METRICS:
            va = _metric_values(by_variant[a], metric_key)
            vb = _metric_values(by_variant[b], metric_key)
            entry = {
                "pair": [a, b],
                "metric": metric_name,
                "p_value": None,
                "significant": False,
            }
            if len(va) >= 2 and len(vb) >= 2:
                try:
                    _, _, p = welch_t_test(va, vb)
                    entry["p_value"] = p
                    entry["significant"] = bool(p < 0.05)
                except DegenerateSampleError:
                    pass
            summary["comparisons"].append(entry)

    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    _write_summary_csv(summary, variant_names, out / "summary.csv")
    return summary


def _write_aggregate_csv(by_variant, variant_names, path):
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        header = ["variant", "epoch", "n_runs"]
        for metric in AGGREGATE_METRICS:
            header += [f"{metric}_mean", f"{metric}_ci_low", f"{metric}_ci_high"]
        writer.writerow(header)
        for variant in variant_names:
            runs = by_variant[variant]
            max_len = max(len(records) for records, _ in runs)
            for epoch in range(max_len):
                present = [records[epoch] for records, _ in runs if epoch < len(records)]
                row = [variant, epoch, len(present)]
                for metric in AGGREGATE_METRICS:
                    values = [
                        getattr(rec, metric)
                        for rec in present
                        if getattr(rec, metric) is not None
                    ]
                    if not values:
                        row += ["", "", ""]
                        continue
                    mean = float(np.mean(values))
                    if len(values) >= 2 and float(np.std(values, ddof=1)) > 0:
                        low, high = confidence_interval(values)
                    else:
                        low = high = mean
                    row += [repr(mean), repr(low), repr(high)]
                writer.writerow(row)


def _write_summary_csv(summary, variant_names, path):
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        header = ["metric"]
        for variant in variant_names:
            header += [f"{variant}_mean", f"{variant}_std"]
        writer.writerow(header)
        for metric_name, row in summary["metrics"].items():
            line = [metric_name]
            for variant in variant_names:
                cell = row.get(variant)
                if cell is None:
                    line += ["", ""]
                else:
                    line += [repr(cell["mean"]), repr(cell["std"])]
            writer.writerow(line)
        if summary["comparisons"]:
            writer.writerow([])
            writer.writerow(["pair", "metric", "p_value", "significant"])
            for entry in summary["comparisons"]:
                writer.writerow(
                    [
                        ":".join(entry["pair"]),
                        entry["metric"],
                        "" if entry["p_value"] is None else repr(entry["p_value"]),
                        entry["significant"],
                    ]
                )
