"""File formats: instance/schedule JSON, dataset JSON lines, manifests."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .model import Instance, Schedule, as_schedule

INSTANCE_KEYS = (
    "num_employees",
    "num_days",
    "num_shifts",
    "hours_per_shift",
    "min_hours",
    "max_hours",
    "max_consecutive",
    "min_rest",
    "understaff_weight",
    "overstaff_weight",
    "coverage",
    "pref_off",
)


def instance_to_dict(instance: Instance) -> dict:
    out = {
        "num_employees": instance.num_employees,
        "num_days": instance.num_days,
        "num_shifts": instance.num_shifts,
        "hours_per_shift": instance.hours_per_shift,
        "min_hours": instance.min_hours,
        "max_hours": instance.max_hours,
        "max_consecutive": instance.max_consecutive,
        "min_rest": instance.min_rest,
        "understaff_weight": instance.understaff_weight,
        "overstaff_weight": instance.overstaff_weight,
        "coverage": instance.coverage.tolist(),
        "pref_off": instance.pref_off.tolist(),
    }
    if instance.reference_min_soft is not None:
        out["reference_min_soft"] = int(instance.reference_min_soft)
    return out


def instance_from_dict(data: dict) -> Instance:
    missing = [k for k in INSTANCE_KEYS if k not in data]
    if missing:
        raise InvalidInputError(f"instance file missing keys: {missing}")
    return Instance(
        num_employees=int(data["num_employees"]),
        num_days=int(data["num_days"]),
        num_shifts=int(data["num_shifts"]),
        hours_per_shift=int(data["hours_per_shift"]),
        min_hours=int(data["min_hours"]),
        max_hours=int(data["max_hours"]),
        max_consecutive=int(data["max_consecutive"]),
        min_rest=int(data["min_rest"]),
        understaff_weight=int(data["understaff_weight"]),
        overstaff_weight=int(data["overstaff_weight"]),
        coverage=data["coverage"],
        pref_off=data["pref_off"],
        reference_min_soft=(
            int(data["reference_min_soft"])
            if data.get("reference_min_soft") is not None
            else None
        ),
    )


def save_instance(instance: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=1) + "\n")


def load_instance(path) -> Instance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: not valid JSON ({exc})") from exc
    return instance_from_dict(data)


def save_schedule(schedule: Schedule, path) -> None:
    arr = as_schedule(schedule)
    Path(path).write_text(json.dumps(arr.tolist()) + "\n")


def load_schedule(path, instance: Instance | None = None) -> Schedule:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: not valid JSON ({exc})") from exc
    return as_schedule(np.asarray(data), instance)


def write_dataset_file(records, path) -> None:
    """One JSON object per line: instance_id, kind, input, target."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "instance_id": rec.instance_id,
                        "kind": rec.kind,
                        "input": np.asarray(rec.input).tolist(),
                        "target": np.asarray(rec.target).tolist(),
                    }
                )
                + "\n"
            )


def read_dataset_file(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def write_manifest(manifest: dict, path) -> None:
    Path(path).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def load_manifest(path) -> dict:
    return json.loads(Path(path).read_text())
