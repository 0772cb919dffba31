"""Command-line interface."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import ga as ga_mod
from . import generate as gen_mod
from . import harness as harness_mod
from . import io as io_mod
from . import oracle as oracle_mod
from .errors import RosteringError
from .improve import build_graph, identity_operator, neural_operator, payload_to_dict, repair_operator
from .model import evaluate


@click.group()
def main():
    """Staff rostering: instances, exact oracle, GA runs, experiments."""


@main.command("gen-instance")
@click.option("--employees", type=int, required=True)
@click.option("--days", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def gen_instance_cmd(employees, days, seed, out):
    """Generate a random instance and write it as JSON."""
    instance = gen_mod.gen_instance(employees, days, seed)
    io_mod.save_instance(instance, out)
    click.echo(f"wrote {out}")


@main.command("gen-dataset")
@click.option("--instances-dir", type=click.Path(file_okay=False, exists=True), required=True)
@click.option("--per-optimal", type=int, default=250, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--split", default="0.8,0.1,0.1", show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
def gen_dataset_cmd(instances_dir, per_optimal, seed, split, out_dir):
    """Build schedule-pair datasets from certified instances.

    Expects <name>.json instance files carrying reference_min_soft next to
    <name>.schedule.json optimal schedules (as written by solve-exact).
    """
    fracs = [float(x) for x in split.split(",")]
    spec = gen_mod.SplitSpec(*fracs)
    inst_dir = Path(instances_dir)
    pairs = []
    ids = []
    instance_files = {}
    for inst_path in sorted(inst_dir.glob("*.json")):
        if inst_path.name.endswith(".schedule.json"):
            continue
        sched_path = inst_path.parent / (inst_path.stem + ".schedule.json")
        if not sched_path.exists():
            raise click.ClickException(f"no schedule file for {inst_path.name}")
        instance = io_mod.load_instance(inst_path)
        schedule = io_mod.load_schedule(sched_path, instance)
        pairs.append((instance, schedule))
        ids.append(inst_path.stem)
        instance_files[inst_path.stem] = str(inst_path.resolve())
    if not pairs:
        raise click.ClickException(f"no instance files found in {instances_dir}")
    train, valid, test = gen_mod.build_dataset(
        pairs, per_optimal=per_optimal, seed=seed, split=spec, ids=ids
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io_mod.write_dataset_file(train, out / "train.jsonl")
    io_mod.write_dataset_file(valid, out / "valid.jsonl")
    io_mod.write_dataset_file(test, out / "test.jsonl")
    manifest = {
        "instances": instance_files,
        "splits": {
            "train": "train.jsonl",
            "valid": "valid.jsonl",
            "test": "test.jsonl",
        },
        "counts": {"train": len(train), "valid": len(valid), "test": len(test)},
        "per_optimal": per_optimal,
        "seed": seed,
        "split": fracs,
    }
    io_mod.write_manifest(manifest, out / "manifest.json")
    click.echo(
        f"wrote {len(train)}/{len(valid)}/{len(test)} records to {out_dir}"
    )


@main.command("solve-exact")
@click.option("--instance", "instance_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Path for the optimal schedule JSON.")
@click.option("--budget", type=int, default=oracle_mod._DEFAULT_NODE_BUDGET,
              show_default=True)
@click.option("--write-reference/--no-write-reference", default=True, show_default=True,
              help="Store the certified minimum on the instance file.")
def solve_exact_cmd(instance_path, out, budget, write_reference):
    """Certify a tiny instance with the exact branch-and-bound oracle."""
    instance = io_mod.load_instance(instance_path)
    result = oracle_mod.solve_exact(instance, budget=budget)
    io_mod.save_schedule(result.schedule, out)
    if write_reference and result.proven:
        instance.reference_min_soft = result.min_soft
        io_mod.save_instance(instance, instance_path)
    click.echo(
        f"min_soft={result.min_soft} proven={result.proven} nodes={result.node_count}"
    )


@main.command("export-lp")
@click.option("--instance", "instance_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def export_lp_cmd(instance_path, out):
    """Write the LP-format model for an external MILP solver."""
    instance = io_mod.load_instance(instance_path)
    oracle_mod.export_lp(instance, out)
    click.echo(f"wrote {out}")


@main.command("import-solution")
@click.option("--instance", "instance_path", type=click.Path(exists=True), required=True)
@click.option("--solution", type=click.Path(exists=True), required=True)
@click.option("--schedule-out", type=click.Path(dir_okay=False), default=None,
              help="Optional path for the reconstructed schedule JSON.")
@click.option("--write-reference/--no-write-reference", default=True, show_default=True)
def import_solution_cmd(instance_path, solution, schedule_out, write_reference):
    """Validate an external solver solution and certify the instance."""
    instance = io_mod.load_instance(instance_path)
    schedule, min_soft = oracle_mod.import_solution(instance, solution)
    if schedule_out:
        io_mod.save_schedule(schedule, schedule_out)
    if write_reference:
        io_mod.save_instance(instance, instance_path)
    click.echo(f"min_soft={min_soft}")


@main.command("evaluate")
@click.option("--instance", "instance_path", type=click.Path(exists=True), required=True)
@click.option("--schedule", "schedule_path", type=click.Path(exists=True), required=True)
def evaluate_cmd(instance_path, schedule_path):
    """Print the penalty report of a schedule as JSON."""
    instance = io_mod.load_instance(instance_path)
    schedule = io_mod.load_schedule(schedule_path, instance)
    report = evaluate(schedule, instance)
    out = {
        "c2_count": report.c2_count,
        "c3_count": report.c3_count,
        "c4_count": report.c4_count,
        "c5_count": report.c5_count,
        "hard_total": report.hard_total,
        "soft_unnormalized": report.soft_unnormalized,
        "soft_normalized": report.soft_normalized,
        "feasible": report.hard_total == 0,
        "is_optimal": (
            None
            if instance.reference_min_soft is None
            else report.hard_total == 0
            and report.soft_unnormalized == instance.reference_min_soft
        ),
    }
    click.echo(json.dumps(out))


@main.command("evaluate-batch")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True,
              help="Dataset manifest mapping instance ids to instance files.")
@click.option("--schedules", "schedules_path", type=click.Path(exists=True), required=True,
              help="JSON lines of {instance_id, schedule}.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Output JSONL path (default: stdout).")
def evaluate_batch_cmd(manifest_path, schedules_path, out):
    """Evaluate many schedules against their instances (one JSON per line)."""
    manifest = io_mod.load_manifest(manifest_path)
    instances = {}
    lines = []
    with open(schedules_path) as fh:
        for raw in fh:
            raw = raw.strip()
            if not raw:
                continue
            rec = json.loads(raw)
            inst_id = rec["instance_id"]
            if inst_id not in instances:
                instances[inst_id] = io_mod.load_instance(manifest["instances"][inst_id])
            instance = instances[inst_id]
            report = evaluate(np.asarray(rec["schedule"]), instance)
            lines.append(
                json.dumps(
                    {
                        "instance_id": inst_id,
                        "hard_total": report.hard_total,
                        "soft_unnormalized": report.soft_unnormalized,
                        "soft_normalized": report.soft_normalized,
                        "feasible": report.hard_total == 0,
                        "reference_min_soft": instance.reference_min_soft,
                        "is_optimal": (
                            None
                            if instance.reference_min_soft is None
                            else report.hard_total == 0
                            and report.soft_unnormalized == instance.reference_min_soft
                        ),
                    }
                )
            )
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


@main.command("build-graphs")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--schedules", "schedules_path", type=click.Path(exists=True), required=True,
              help="JSON lines of {instance_id, schedule} or dataset records.")
@click.option("--field", "field_name", default="schedule", show_default=True,
              help="Which field of each record holds the schedule matrix.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def build_graphs_cmd(manifest_path, schedules_path, field_name, out):
    """Serialize wire-protocol graph payloads for a batch of schedules."""
    manifest = io_mod.load_manifest(manifest_path)
    instances = {}
    with open(schedules_path) as src, open(out, "w") as dst:
        for raw in src:
            raw = raw.strip()
            if not raw:
                continue
            rec = json.loads(raw)
            inst_id = rec["instance_id"]
            if inst_id not in instances:
                instances[inst_id] = io_mod.load_instance(manifest["instances"][inst_id])
            instance = instances[inst_id]
            payload = build_graph(np.asarray(rec[field_name]), instance)
            dst.write(
                json.dumps(
                    {
                        "instance_id": inst_id,
                        "meta": {
                            "employees": payload.meta[0],
                            "days": payload.meta[1],
                            "feature_dim": payload.meta[2],
                        },
                        "graph": payload_to_dict(payload),
                    }
                )
                + "\n"
            )
    click.echo(f"wrote {out}")


def _improver_from_flags(use_improver, neural_endpoint):
    if use_improver == "none":
        return identity_operator()
    if use_improver == "repair":
        return repair_operator()
    if not neural_endpoint:
        raise click.ClickException("--use-improver neural requires --neural-endpoint")
    return neural_operator(neural_endpoint)


@main.command("run-ga")
@click.option("--instance", "instance_path", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON file of GA parameters; flags below override it.")
@click.option("--use-improver", type=click.Choice(["none", "repair", "neural"]),
              default="none", show_default=True)
@click.option("--neural-endpoint", default=None, help="host:port of a neural server.")
@click.option("--seed", type=int, default=None)
@click.option("--trace-out", type=click.Path(dir_okay=False), default=None)
@click.option("--summary-out", type=click.Path(dir_okay=False), default=None)
@click.option("--max-wall-seconds", type=float, default=None)
@click.option("--pop-size", type=int, default=None)
@click.option("--stop-cond", type=click.Choice(["v1", "v2"]), default=None)
@click.option("--nb-max-epochs", type=int, default=None)
@click.option("--max-patience", type=int, default=None)
@click.option("--probab-crossover", type=float, default=None)
@click.option("--probab-mutation", type=float, default=None)
@click.option("--min-prob-greedy", type=float, default=None)
def run_ga_cmd(instance_path, config_path, use_improver, neural_endpoint, seed,
               trace_out, summary_out, max_wall_seconds, pop_size, stop_cond,
               nb_max_epochs, max_patience, probab_crossover, probab_mutation,
               min_prob_greedy):
    """Run the genetic algorithm once on an instance."""
    instance = io_mod.load_instance(instance_path)
    kwargs = {}
    if config_path:
        kwargs.update(json.loads(Path(config_path).read_text()))
    overrides = {
        "seed": seed,
        "max_wall_seconds": max_wall_seconds,
        "pop_size": pop_size,
        "stop_cond_version": stop_cond,
        "nb_max_epochs": nb_max_epochs,
        "max_patience": max_patience,
        "probab_crossover": probab_crossover,
        "probab_mutation": probab_mutation,
        "min_prob_greedy": min_prob_greedy,
    }
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    kwargs["use_improver"] = use_improver != "none"
    if "crossover_mix" in kwargs:
        kwargs["crossover_mix"] = tuple(kwargs["crossover_mix"])
    if "mutation_mix" in kwargs:
        kwargs["mutation_mix"] = tuple(kwargs["mutation_mix"])
    cfg = ga_mod.GaConfig(**kwargs)
    improver = _improver_from_flags(use_improver, neural_endpoint)
    try:
        trace = ga_mod.run(instance, cfg, improver=improver)
    finally:
        improver.close()
    if trace_out:
        ga_mod.write_trace_csv(trace.records, trace_out)
    summary = {
        "instance": Path(instance_path).stem,
        "seed": cfg.seed,
        "stop_epoch": trace.stop_epoch,
        "total_seconds": trace.total_seconds,
        "best_fitness": trace.best_fitness,
        "first_optimal_epoch": trace.first_optimal_epoch,
        "reached_optimal": trace.reached_optimal,
        "best_schedule": trace.best_schedule.tolist(),
    }
    if summary_out:
        Path(summary_out).write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    click.echo(
        f"stopped at epoch {trace.stop_epoch} best_fitness={trace.best_fitness:.6f} "
        f"optimal={trace.reached_optimal}"
    )


@main.command("experiment")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def experiment_cmd(config_path, workers, out_dir, figures):
    """Run a full experiment grid and write reports."""
    cfg = harness_mod.load_experiment_config(config_path)
    harness_mod.run_experiment(cfg, out_dir, workers=workers)
    if figures:
        from .plots import render_aggregate_figures

        written = render_aggregate_figures(
            Path(out_dir) / "aggregate.csv", Path(out_dir) / "figures"
        )
        click.echo(f"rendered {len(written)} figures")
    click.echo(f"report written to {out_dir}")


@main.command("report")
@click.option("--runs", "runs_dir", type=click.Path(file_okay=False, exists=True), required=True)
@click.option("--pairs", default="", help="Comma-separated a:b variant pairs to compare.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def report_cmd(runs_dir, pairs, out_dir, figures):
    """Assemble reports from stored traces."""
    pair_list = []
    if pairs:
        for chunk in pairs.split(","):
            a, _, b = chunk.partition(":")
            if not b:
                raise click.ClickException(f"bad pair {chunk!r}; expected a:b")
            pair_list.append((a, b))
    traces_root = Path(runs_dir) / "traces"
    root = traces_root if traces_root.is_dir() else Path(runs_dir)
    variant_names = sorted(p.name for p in root.iterdir() if p.is_dir())
    harness_mod.assemble_report(Path(runs_dir), variant_names, pair_list, out_dir)
    if figures:
        from .plots import render_aggregate_figures

        written = render_aggregate_figures(
            Path(out_dir) / "aggregate.csv", Path(out_dir) / "figures"
        )
        click.echo(f"rendered {len(written)} figures")
    click.echo(f"report written to {out_dir}")


def run_main():
    try:
        main(standalone_mode=True)
    except RosteringError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    run_main()
