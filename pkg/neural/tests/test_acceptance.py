"""Acceptance suite for the neural operator (criteria 11-14).

Run with `pytest tests/test_acceptance.py -v -s`.  The end-to-end
comparison drives the roster toolkit exclusively through its CLI and the
wire protocol.
"""

import csv
import time
import zlib

import numpy as np

from conftest import ROSTER, run_cli, wire_client


def _report(criterion, detail, budget, elapsed):
    print(f"[criterion {criterion:>2}] PASS in {elapsed:.2f}s (budget {budget}s) - {detail}")


def _handshake(send):
    reply = send({"hello": 1, "protocol": 1})
    assert reply == {"ready": True, "protocol": 1}


def test_criterion_11_protocol_conformance(server, train_dataset_dir):
    from shiftgnn.data import load_split

    start = time.perf_counter()
    records = load_split(train_dataset_dir, "valid")[:4]
    send, close = wire_client(server.port)
    _handshake(send)

    request = {
        "id": 1,
        "meta": dict(records[0].meta),
        "graphs": [r.graph for r in records],
    }
    reply = send(request)
    assert reply["id"] == 1
    assert len(reply["schedules"]) == 4
    E, D = records[0].meta["employees"], records[0].meta["days"]
    assert all(len(m) == E and len(m[0]) == D for m in reply["schedules"])

    bad = {"id": 2, "meta": dict(records[0].meta), "graphs": [records[0].graph]}
    bad["meta"]["feature_dim"] = 16
    reply = send(bad)
    assert reply["id"] == 2 and "error" in reply
    close()
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    _report(11, "handshake, batch shapes, and error responses verified", 30, elapsed)


def test_criterion_12_employee_equivariance(train_dataset_dir, trained_checkpoint):
    from shiftgnn.model import GraphBatch, load_checkpoint
    from shiftgnn.data import load_split
    from test_model import permute_payload

    start = time.perf_counter()
    model = load_checkpoint(trained_checkpoint)
    records = load_split(train_dataset_dir, "valid")[:3]
    rng = np.random.default_rng(12)
    for record in records:
        E, D = record.meta["employees"], record.meta["days"]
        perm = rng.permutation(E)
        base = (
            model(GraphBatch([record.graph], [record.meta]))
            .detach().numpy().reshape(E, D, 4)
        )
        permuted = permute_payload(record.graph, record.meta, perm)
        swapped = (
            model(GraphBatch([permuted], [record.meta]))
            .detach().numpy().reshape(E, D, 4)
        )
        np.testing.assert_allclose(swapped, base[perm], atol=1e-4)
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    _report(12, "permutation equivariance within 1e-4 on a trained model", 30, elapsed)


def test_criterion_13_overfit_sanity(overfit_dataset_dir, tmp_path):
    from shiftgnn.config import ModelConfig
    from shiftgnn.train import train

    start = time.perf_counter()
    result = train(
        overfit_dataset_dir,
        ModelConfig(),
        seed=0,
        out_path=tmp_path / "overfit.pt",
        max_epochs=200,
        early_stopping=False,
    )
    assert result.final_train_ce < 0.1
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0
    _report(
        13,
        f"train CE {result.final_train_ce:.4f} < 0.1 after 200 epochs",
        300,
        elapsed,
    )


def _final_feasible_fraction(trace_path):
    with open(trace_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert rows
    return int(rows[-1]["num_feasible"])


def test_criterion_14_end_to_end_hybrid(server, held_out_instances, tmp_path):
    from rosterga.stats import welch_t_test  # statistics helper only

    start = time.perf_counter()
    budget = 40
    pop_size = 30
    runs_per_instance = 10
    identity_scores, neural_scores = [], []
    for inst_path in held_out_instances:
        for r in range(runs_per_instance):
            seed = 9000 + 37 * r + zlib.crc32(inst_path.stem.encode()) % 1000
            for improver, scores in (("none", identity_scores),
                                     ("neural", neural_scores)):
                trace = tmp_path / f"{inst_path.stem}-{improver}-{r}.csv"
                args = ROSTER + [
                    "run-ga", "--instance", str(inst_path),
                    "--seed", str(seed),
                    "--pop-size", str(pop_size),
                    "--stop-cond", "v2",
                    "--nb-max-epochs", str(budget),
                    "--max-patience", "1000000",
                    "--use-improver", improver,
                    "--trace-out", str(trace),
                ]
                if improver == "neural":
                    args += ["--neural-endpoint", server.endpoint]
                run_cli(args)
                scores.append(_final_feasible_fraction(trace) / pop_size)
    t, dof, p = welch_t_test(neural_scores, identity_scores)
    mean_neural = float(np.mean(neural_scores))
    mean_identity = float(np.mean(identity_scores))
    assert mean_neural >= mean_identity
    assert p < 0.05
    elapsed = time.perf_counter() - start
    assert elapsed < 1800.0
    _report(
        14,
        f"population feasibility {mean_identity:.3f} -> {mean_neural:.3f}, p={p:.2e}",
        1800,
        elapsed,
    )
