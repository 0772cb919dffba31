"""Dataset access: graph payloads and targets, via the roster toolkit CLI.

The scheduling semantics live entirely in the primary package; this module
only shells out to its CLI (`build-graphs`, `evaluate-batch`) and parses
the JSON it returns.  Records therefore carry ready-made feature payloads,
and predicted schedules are scored without re-implementing any constraint
logic here.
"""

from __future__ import annotations

import json
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

ROSTER_CLI = [sys.executable, "-m", "rosterga.cli"]


@dataclass
class GraphRecord:
    instance_id: str
    meta: dict
    graph: dict
    target: list[list[int]]  # (E, D) shift codes
    kind: str


def _run_cli(args: list[str]) -> None:
    result = subprocess.run(
        ROSTER_CLI + args, capture_output=True, text=True
    )
    if result.returncode != 0:
        raise RuntimeError(
            f"rosterga {' '.join(args)} failed:\n{result.stderr or result.stdout}"
        )


def _read_jsonl(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def load_split(data_dir, split: str, cache_dir=None) -> list[GraphRecord]:
    """Records of one split with graph payloads built by the primary CLI.

    Payload files are cached next to the dataset (or in `cache_dir`) so
    repeated training runs skip the conversion.
    """
    data_dir = Path(data_dir)
    manifest = json.loads((data_dir / "manifest.json").read_text())
    split_file = data_dir / manifest["splits"][split]
    records = _read_jsonl(split_file)
    cache_root = Path(cache_dir) if cache_dir else data_dir
    payload_path = cache_root / f"{split}.graphs.jsonl"
    if not payload_path.exists() or payload_path.stat().st_mtime < split_file.stat().st_mtime:
        with tempfile.NamedTemporaryFile("w", suffix=".jsonl", delete=False) as fh:
            for rec in records:
                fh.write(
                    json.dumps(
                        {"instance_id": rec["instance_id"], "schedule": rec["input"]}
                    )
                    + "\n"
                )
            tmp = fh.name
        try:
            _run_cli(
                [
                    "build-graphs",
                    "--manifest", str(data_dir / "manifest.json"),
                    "--schedules", tmp,
                    "--out", str(payload_path),
                ]
            )
        finally:
            Path(tmp).unlink(missing_ok=True)
    payloads = _read_jsonl(payload_path)
    if len(payloads) != len(records):
        raise RuntimeError(f"payload cache out of sync for split {split}")
    out = []
    for rec, pay in zip(records, payloads):
        if rec["instance_id"] != pay["instance_id"]:
            raise RuntimeError(f"payload order mismatch in split {split}")
        out.append(
            GraphRecord(
                instance_id=rec["instance_id"],
                meta=pay["meta"],
                graph=pay["graph"],
                target=rec["target"],
                kind=rec["kind"],
            )
        )
    return out


def evaluate_schedules(manifest_path, schedules: list[tuple[str, list[list[int]]]]) -> list[dict]:
    """Score (instance_id, schedule) pairs with the primary evaluator CLI."""
    with tempfile.NamedTemporaryFile("w", suffix=".jsonl", delete=False) as fh:
        for instance_id, schedule in schedules:
            fh.write(json.dumps({"instance_id": instance_id, "schedule": schedule}) + "\n")
        tmp_in = fh.name
    tmp_out = tmp_in + ".eval"
    try:
        _run_cli(
            [
                "evaluate-batch",
                "--manifest", str(manifest_path),
                "--schedules", tmp_in,
                "--out", tmp_out,
            ]
        )
        return _read_jsonl(tmp_out)
    finally:
        Path(tmp_in).unlink(missing_ok=True)
        Path(tmp_out).unlink(missing_ok=True)
