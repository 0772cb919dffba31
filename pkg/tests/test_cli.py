"""End-to-end CLI checks via click's test runner."""

import json

import pytest
from click.testing import CliRunner

from rosterga.cli import main
from rosterga.io import load_instance, load_schedule

from stub_server import StubServer, argmax_echo_responder


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


def certify(runner, tmp_path, name, employees=3, days=4, seed=3):
    inst_path = tmp_path / f"{name}.json"
    sched_path = tmp_path / f"{name}.schedule.json"
    invoke(runner, ["gen-instance", "--employees", str(employees), "--days", str(days),
                    "--seed", str(seed), "--out", str(inst_path)])
    invoke(runner, ["solve-exact", "--instance", str(inst_path), "--out", str(sched_path)])
    return inst_path, sched_path


def test_gen_instance_and_solve(runner, tmp_path):
    inst_path, sched_path = certify(runner, tmp_path, "a")
    inst = load_instance(inst_path)
    assert inst.reference_min_soft is not None
    schedule = load_schedule(sched_path, inst)
    assert schedule.shape == (3, 4)


def test_lp_round_trip_via_cli(runner, tmp_path):
    from lp_solve import solve_lp_file, write_solution_file

    inst_path, _ = certify(runner, tmp_path, "b", seed=5)
    ref = load_instance(inst_path).reference_min_soft
    lp_path = tmp_path / "model.lp"
    invoke(runner, ["export-lp", "--instance", str(inst_path), "--out", str(lp_path)])
    _, values = solve_lp_file(lp_path)
    sol_path = tmp_path / "model.sol"
    write_solution_file(values, sol_path)
    result = invoke(runner, ["import-solution", "--instance", str(inst_path),
                             "--solution", str(sol_path)])
    assert f"min_soft={ref}" in result.output


def test_run_ga_and_evaluate(runner, tmp_path):
    inst_path, sched_path = certify(runner, tmp_path, "c", seed=7)
    trace_path = tmp_path / "trace.csv"
    summary_path = tmp_path / "run.json"
    invoke(runner, ["run-ga", "--instance", str(inst_path), "--seed", "3",
                    "--pop-size", "10", "--stop-cond", "v1",
                    "--nb-max-epochs", "3000", "--max-patience", "100000",
                    "--trace-out", str(trace_path), "--summary-out", str(summary_path)])
    summary = json.loads(summary_path.read_text())
    assert trace_path.exists()
    assert summary["stop_epoch"] >= 0
    result = invoke(runner, ["evaluate", "--instance", str(inst_path),
                             "--schedule", str(sched_path)])
    report = json.loads(result.output)
    assert report["feasible"] is True
    assert report["is_optimal"] is True


def test_gen_dataset_and_batch_tools(runner, tmp_path):
    certify(runner, tmp_path, "d", seed=9)
    out_dir = tmp_path / "dataset"
    invoke(runner, ["gen-dataset", "--instances-dir", str(tmp_path),
                    "--per-optimal", "4", "--seed", "11",
                    "--out-dir", str(out_dir)])
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["counts"]["train"] + manifest["counts"]["valid"] + manifest[
        "counts"
    ]["test"] == 8
    train_lines = (out_dir / "train.jsonl").read_text().splitlines()
    rec = json.loads(train_lines[0])
    assert set(rec) == {"instance_id", "kind", "input", "target"}

    # evaluate-batch over the dataset inputs
    sched_lines = tmp_path / "inputs.jsonl"
    with open(sched_lines, "w") as fh:
        for line in train_lines:
            r = json.loads(line)
            fh.write(json.dumps({"instance_id": r["instance_id"],
                                 "schedule": r["input"]}) + "\n")
    out_eval = tmp_path / "eval.jsonl"
    invoke(runner, ["evaluate-batch", "--manifest", str(out_dir / "manifest.json"),
                    "--schedules", str(sched_lines), "--out", str(out_eval)])
    evals = [json.loads(x) for x in out_eval.read_text().splitlines()]
    assert len(evals) == len(train_lines)
    assert all("hard_total" in e and "is_optimal" in e for e in evals)

    # graph payloads for the same records
    out_graphs = tmp_path / "graphs.jsonl"
    invoke(runner, ["build-graphs", "--manifest", str(out_dir / "manifest.json"),
                    "--schedules", str(sched_lines), "--out", str(out_graphs)])
    graphs = [json.loads(x) for x in out_graphs.read_text().splitlines()]
    assert len(graphs) == len(train_lines)
    assert graphs[0]["meta"]["feature_dim"] == 17
    assert "shift_feats" in graphs[0]["graph"]


def test_run_ga_with_neural_stub(runner, tmp_path):
    inst_path, _ = certify(runner, tmp_path, "e", seed=13)
    with StubServer(argmax_echo_responder) as server:
        invoke(runner, ["run-ga", "--instance", str(inst_path), "--seed", "5",
                        "--pop-size", "6", "--stop-cond", "v2",
                        "--nb-max-epochs", "5", "--max-patience", "100",
                        "--use-improver", "neural",
                        "--neural-endpoint", server.endpoint])


def test_experiment_and_report(runner, tmp_path):
    inst_path, _ = certify(runner, tmp_path, "f", seed=15)
    exp = {
        "instances": [str(inst_path)],
        "runs_per_instance": 2,
        "base_seed": 3,
        "variants": [
            {"name": "v2", "ga": {"pop_size": 6, "stop_cond_version": "v2",
                                   "nb_max_epochs": 8, "max_patience": 50}},
            {"name": "v2+op", "ga": {"pop_size": 6, "stop_cond_version": "v2",
                                      "nb_max_epochs": 8, "max_patience": 50},
             "improver": "repair"},
        ],
        "pairs": [["v2", "v2+op"]],
    }
    cfg_path = tmp_path / "exp.json"
    cfg_path.write_text(json.dumps(exp))
    out_dir = tmp_path / "results"
    invoke(runner, ["experiment", "--config", str(cfg_path), "--out", str(out_dir)])
    assert (out_dir / "summary.json").exists()
    assert list((out_dir / "figures").glob("*.png"))

    report_dir = tmp_path / "report"
    invoke(runner, ["report", "--runs", str(out_dir), "--pairs", "v2:v2+op",
                    "--out", str(report_dir), "--no-figures"])
    summary = json.loads((report_dir / "summary.json").read_text())
    assert summary["comparisons"]
