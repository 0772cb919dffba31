"""Session fixtures: datasets and instances built via the roster CLI.

Everything the neural package consumes comes through the primary
toolkit's external interfaces (CLI commands and file formats); these
fixtures drive that CLI once per session and cache the results.
"""

from __future__ import annotations

import json
import re
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest

ROSTER = [sys.executable, "-m", "rosterga.cli"]
SHIFTGNN = [sys.executable, "-m", "shiftgnn.cli"]

TRAIN_INSTANCE_SEEDS = tuple(range(101, 109))
HELD_OUT_SEEDS = (201, 202, 203, 204)


def run_cli(args, **kwargs):
    result = subprocess.run(args, capture_output=True, text=True, **kwargs)
    assert result.returncode == 0, f"{' '.join(map(str, args))}\n{result.stderr or result.stdout}"
    return result


def certify_instance(directory: Path, name: str, seed: int, employees=4, days=5):
    inst = directory / f"{name}.json"
    sched = directory / f"{name}.schedule.json"
    run_cli(ROSTER + ["gen-instance", "--employees", str(employees), "--days", str(days),
                      "--seed", str(seed), "--out", str(inst)])
    run_cli(ROSTER + ["solve-exact", "--instance", str(inst), "--out", str(sched)])
    return inst


@pytest.fixture(scope="session")
def data_root(tmp_path_factory):
    return tmp_path_factory.mktemp("shiftgnn-data")


@pytest.fixture(scope="session")
def train_dataset_dir(data_root):
    """Dataset over eight certified 4x5 instances (training family)."""
    inst_dir = data_root / "train-instances"
    inst_dir.mkdir()
    for seed in TRAIN_INSTANCE_SEEDS:
        certify_instance(inst_dir, f"inst{seed}", seed)
    out_dir = data_root / "train-dataset"
    run_cli(ROSTER + ["gen-dataset", "--instances-dir", str(inst_dir),
                      "--per-optimal", "30", "--seed", "17",
                      "--split", "0.8,0.1,0.1", "--out-dir", str(out_dir)])
    return out_dir


@pytest.fixture(scope="session")
def overfit_dataset_dir(data_root):
    """Exactly 32 training records from one certified instance."""
    inst_dir = data_root / "overfit-instances"
    inst_dir.mkdir()
    certify_instance(inst_dir, "inst300", 300)
    out_dir = data_root / "overfit-dataset"
    run_cli(ROSTER + ["gen-dataset", "--instances-dir", str(inst_dir),
                      "--per-optimal", "16", "--seed", "4",
                      "--split", "1,0,0", "--out-dir", str(out_dir)])
    return out_dir


@pytest.fixture(scope="session")
def held_out_instances(data_root):
    inst_dir = data_root / "held-out"
    inst_dir.mkdir()
    return [
        certify_instance(inst_dir, f"inst{seed}", seed) for seed in HELD_OUT_SEEDS
    ]


@pytest.fixture(scope="session")
def trained_checkpoint(data_root, train_dataset_dir):
    """Checkpoint trained with the default configuration and early stopping."""
    ckpt = data_root / "model.pt"
    run_cli(SHIFTGNN + ["train", "--data", str(train_dataset_dir),
                        "--seed", "11", "--out", str(ckpt),
                        "--max-epochs", "120"])
    return ckpt


class ServerProcess:
    def __init__(self, ckpt: Path):
        self.proc = subprocess.Popen(
            SHIFTGNN + ["serve", "--ckpt", str(ckpt), "--listen", "127.0.0.1:0"],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
        )
        line = self.proc.stderr.readline()
        match = re.search(r"listening on .*:(\d+)", line)
        assert match, f"server did not announce a port: {line!r}"
        self.port = int(match.group(1))
        self.endpoint = f"127.0.0.1:{self.port}"
        deadline = time.time() + 10
        while time.time() < deadline:
            try:
                socket.create_connection(("127.0.0.1", self.port), timeout=1).close()
                return
            except OSError:
                time.sleep(0.05)
        raise RuntimeError("server never accepted connections")

    def stop(self):
        self.proc.terminate()
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()


@pytest.fixture
def server(trained_checkpoint):
    srv = ServerProcess(trained_checkpoint)
    yield srv
    srv.stop()


def wire_client(port):
    """Tiny protocol client for tests: (send, close)."""
    sock = socket.create_connection(("127.0.0.1", port), timeout=30)
    fh = sock.makefile("rwb")

    def send(obj):
        fh.write(json.dumps(obj).encode() + b"\n")
        fh.flush()
        line = fh.readline()
        return json.loads(line) if line else None

    def close():
        fh.close()
        sock.close()

    return send, close
