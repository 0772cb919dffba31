"""Random instance generation and (input, target) schedule-pair datasets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GenerationExhaustedError, InvalidInputError
from .model import Instance, NUM_CODES, Schedule, as_schedule, batch_penalties, is_optimal

KIND_UNFEASIBLE_TO_FEASIBLE = "unfeasible_to_feasible"
KIND_FEASIBLE_TO_OPTIMAL = "feasible_to_optimal"
RECORD_KINDS = (KIND_UNFEASIBLE_TO_FEASIBLE, KIND_FEASIBLE_TO_OPTIMAL)

# Reference parameter set for the 100-employee, 7-day family; other horizons
# scale the hour bounds proportionally (clamped to the horizon capacity).
_BASE_MIN_HOURS = 32
_BASE_MAX_HOURS = 48
_BASE_DAYS = 7


@dataclass
class DatasetRecord:
    instance_id: str
    input: Schedule
    target: Schedule
    kind: str

    def __post_init__(self):
        if self.kind not in RECORD_KINDS:
            raise InvalidInputError(f"unknown record kind {self.kind!r}")


@dataclass
class SplitSpec:
    train_frac: float = 0.8
    valid_frac: float = 0.1
    test_frac: float = 0.1

    def __post_init__(self):
        total = self.train_frac + self.valid_frac + self.test_frac
        if abs(total - 1.0) > 1e-9:
            raise InvalidInputError(f"split fractions sum to {total}, expected 1")
        if min(self.train_frac, self.valid_frac, self.test_frac) < 0:
            raise InvalidInputError("split fractions must be nonnegative")


def _hard_total(cells: np.ndarray, instance: Instance) -> int:
    return int(batch_penalties(cells[None], instance).hard[0])


def gen_instance(num_employees: int, num_days: int, seed: int) -> Instance:
    """Random instance with the fixed parameter family, scaled to the horizon."""
    if num_employees < 1 or num_days < 1:
        raise InvalidInputError("sizes must be positive")
    rng = np.random.default_rng(seed)
    min_hours = (_BASE_MIN_HOURS * num_days) // _BASE_DAYS
    max_hours = min((_BASE_MAX_HOURS * num_days) // _BASE_DAYS, 8 * num_days)
    coverage = np.full((num_days, 3), num_employees // 3, dtype=np.int64)
    pref_off = rng.integers(0, 2, size=(num_employees, num_days), dtype=np.int64)
    return Instance(
        num_employees=num_employees,
        num_days=num_days,
        num_shifts=3,
        hours_per_shift=8,
        min_hours=min_hours,
        max_hours=max_hours,
        max_consecutive=5,
        min_rest=2,
        understaff_weight=100,
        overstaff_weight=1,
        coverage=coverage,
        pref_off=pref_off,
    )


def perturb_feasible(
    optimal: Schedule, instance: Instance, count: int, seed: int
) -> list[Schedule]:
    """Distinct feasible variants of a feasible schedule via accepted cell edits.

    Each variant applies between 1 and 3*D uniform cell changes, keeping an
    edit only when the schedule stays feasible.  Duplicates (including the
    source schedule itself) are hashed away and redrawn.
    """
    base = as_schedule(optimal, instance)
    if _hard_total(base, instance) != 0:
        raise InvalidInputError("perturb_feasible requires a feasible source")
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    rng = np.random.default_rng(seed)
    E, D = instance.shape
    seen = {base.tobytes()}
    out: list[Schedule] = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 1000 * count:
            raise GenerationExhaustedError(
                f"could not build {count} distinct feasible variants "
                f"within {1000 * count} attempts"
            )
        cand = base.copy()
        target_changes = int(rng.integers(1, 3 * D + 1))
        applied = 0
        draws = 0
        while applied < target_changes and draws < 100 * target_changes:
            draws += 1
            e = int(rng.integers(E))
            d = int(rng.integers(D))
            old = cand[e, d]
            cand[e, d] = (old + int(rng.integers(1, NUM_CODES))) % NUM_CODES
            if _hard_total(cand, instance) == 0:
                applied += 1
            else:
                cand[e, d] = old
        if applied == 0:
            continue
        key = cand.tobytes()
        if key in seen:
            continue
        seen.add(key)
        out.append(cand)
    return out


def make_unfeasible(feasible: Schedule, instance: Instance, seed: int) -> Schedule:
    """Mutate uniform cells (keeping every edit) until a hard rule breaks."""
    cells = as_schedule(feasible, instance).copy()
    if _hard_total(cells, instance) != 0:
        raise InvalidInputError("make_unfeasible requires a feasible input")
    rng = np.random.default_rng(seed)
    E, D = instance.shape
    for _ in range(100):
        e = int(rng.integers(E))
        d = int(rng.integers(D))
        cells[e, d] = (cells[e, d] + int(rng.integers(1, NUM_CODES))) % NUM_CODES
        if _hard_total(cells, instance) > 0:
            return cells
    raise GenerationExhaustedError("still feasible after 100 mutations")


def build_dataset(
    instances: list[tuple[Instance, Schedule]],
    per_optimal: int,
    seed: int,
    split: SplitSpec | None = None,
    ids: list[str] | None = None,
) -> tuple[list[DatasetRecord], list[DatasetRecord], list[DatasetRecord]]:
    """Schedule-pair records from certified optima, shuffled and split.

    Per optimal schedule: ``per_optimal`` feasible perturbations, one
    unfeasible mutation of each, yielding records (unfeasible -> feasible
    source) and (feasible -> optimal).
    """
    split = split or SplitSpec()
    if ids is None:
        ids = [f"inst-{i:04d}" for i in range(len(instances))]
    if len(ids) != len(instances):
        raise InvalidInputError("ids and instances length mismatch")
    rng = np.random.default_rng(seed)
    records: list[DatasetRecord] = []
    for inst_id, (instance, optimal) in zip(ids, instances):
        optimal = as_schedule(optimal, instance)
        if not is_optimal(optimal, instance):
            raise InvalidInputError(
                f"{inst_id}: schedule is not optimal for its instance"
            )
        feasibles = perturb_feasible(
            optimal, instance, per_optimal, seed=int(rng.integers(2**63))
        )
        for feas in feasibles:
            unfeas = make_unfeasible(feas, instance, seed=int(rng.integers(2**63)))
            records.append(
                DatasetRecord(inst_id, unfeas, feas, KIND_UNFEASIBLE_TO_FEASIBLE)
            )
            records.append(
                DatasetRecord(inst_id, feas, optimal, KIND_FEASIBLE_TO_OPTIMAL)
            )
    order = rng.permutation(len(records))
    shuffled = [records[i] for i in order]
    n = len(shuffled)
    n_train = int(n * split.train_frac)
    n_valid = int(n * split.valid_frac)
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_valid],
        shuffled[n_train + n_valid :],
    )
