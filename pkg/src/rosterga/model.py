"""Staff-rostering model: instance data, penalty evaluation, fitness.

Shift codes: 0 = rest, 1 = morning, 2 = afternoon, 3 = night.  A schedule is
an (E, D) integer matrix holding one code per employee and day, so the
one-shift-per-day rule cannot be violated by construction.

Hard rules, each counted once per violated instantiation (C3 once per
employee):

* C2  a night shift must not be followed by a morning shift the next day;
* C3  every employee works between ``min_hours`` and ``max_hours`` in total;
* C4  no more than ``max_consecutive`` worked days in a row;
* C5  interior rest blocks (flanked by worked days on both sides) must span
      at least ``min_rest`` days.

The soft objective sums understaffing/overstaffing penalties against the
coverage targets plus granted shifts on preferred days off.  All raw
penalties are integers; reals appear only after normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from types import SimpleNamespace

import numpy as np

from .errors import ConfigurationError, InvalidInputError


class ShiftCode(IntEnum):
    REST = 0
    MORNING = 1
    AFTERNOON = 2
    NIGHT = 3


NUM_CODES = 4

# Schedules are plain (E, D) integer ndarrays; the alias is documentation.
Schedule = np.ndarray


@dataclass
class Instance:
    """Problem parameters for one rostering instance.

    ``coverage`` is a (num_days, num_shifts) matrix of staffing targets;
    ``pref_off`` is a (num_employees, num_days) 0/1 matrix where 1 marks a
    requested day off.  ``reference_min_soft``, when present, is the
    certified minimum achievable soft objective (exact oracle or imported
    solver solution).
    """

    num_employees: int
    num_days: int
    num_shifts: int = 3
    hours_per_shift: int = 8
    min_hours: int = 0
    max_hours: int = 0
    max_consecutive: int = 5
    min_rest: int = 2
    understaff_weight: int = 100
    overstaff_weight: int = 1
    coverage: np.ndarray = field(default=None)
    pref_off: np.ndarray = field(default=None)
    reference_min_soft: int | None = None

    def __post_init__(self):
        if self.num_employees < 1 or self.num_days < 1 or self.num_shifts < 1:
            raise InvalidInputError("sizes must be positive")
        if self.hours_per_shift < 1:
            raise InvalidInputError("hours_per_shift must be positive")
        if self.min_hours < 0 or self.max_hours < 0:
            raise InvalidInputError("hour bounds must be nonnegative")
        if self.min_hours > self.max_hours:
            raise InvalidInputError("min_hours exceeds max_hours")
        if self.max_hours > self.num_days * self.hours_per_shift:
            raise InvalidInputError("max_hours exceeds the horizon capacity")
        if self.max_consecutive < 1 or self.min_rest < 1:
            raise InvalidInputError("max_consecutive and min_rest must be positive")
        if self.understaff_weight < 0 or self.overstaff_weight < 0:
            raise InvalidInputError("staffing weights must be nonnegative")
        if self.coverage is None:
            raise InvalidInputError("coverage matrix is required")
        if self.pref_off is None:
            raise InvalidInputError("pref_off matrix is required")
        self.coverage = np.asarray(self.coverage, dtype=np.int64)
        self.pref_off = np.asarray(self.pref_off, dtype=np.int64)
        if self.coverage.shape != (self.num_days, self.num_shifts):
            raise InvalidInputError(
                f"coverage shape {self.coverage.shape} != "
                f"({self.num_days}, {self.num_shifts})"
            )
        if self.pref_off.shape != (self.num_employees, self.num_days):
            raise InvalidInputError(
                f"pref_off shape {self.pref_off.shape} != "
                f"({self.num_employees}, {self.num_days})"
            )
        if (self.coverage < 0).any():
            raise InvalidInputError("coverage targets must be nonnegative")
        if not np.isin(self.pref_off, (0, 1)).all():
            raise InvalidInputError("pref_off entries must be 0 or 1")
        if self.reference_min_soft is not None and self.reference_min_soft < 0:
            raise InvalidInputError("reference_min_soft must be nonnegative")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.num_employees, self.num_days)

    def soft_denominators(self) -> np.ndarray:
        """Per-(day, shift) normalization denominators for coverage terms."""
        u = self.coverage
        worst = np.maximum(
            u * self.understaff_weight,
            (self.num_employees - u) * self.overstaff_weight,
        )
        return 1 + worst


@dataclass
class PenaltyReport:
    """Decomposed hard-violation counts and soft penalty values."""

    c2_count: int
    c3_count: int
    c4_count: int
    c5_count: int
    hard_total: int
    soft_unnormalized: int
    soft_normalized: float
    per_day_shift_coverage: np.ndarray  # (D, S, 2) of (understaff, overstaff)
    per_employee_pref: np.ndarray  # (E,)


def as_schedule(cells, instance: Instance | None = None) -> Schedule:
    """Validate and coerce an array-like into an (E, D) schedule matrix."""
    arr = np.asarray(cells, dtype=np.int64)
    if arr.ndim != 2:
        raise InvalidInputError("schedule must be a 2-D matrix")
    if instance is not None and arr.shape != instance.shape:
        raise InvalidInputError(
            f"schedule shape {arr.shape} does not match instance {instance.shape}"
        )
    if arr.size and (arr.min() < 0 or arr.max() >= NUM_CODES):
        raise InvalidInputError("shift codes must lie in 0..3")
    return arr


def max_fitness(num_employees: int, num_days: int, num_shifts: int = 3) -> int:
    """Upper-bound constant used by the fitness formula."""
    if num_employees < 1 or num_days < 1 or num_shifts < 1:
        raise InvalidInputError("max_fitness arguments must be positive")
    return (
        num_employees * num_days * (num_shifts + 1)
        + num_shifts * num_days
        + num_employees
    )


def batch_penalties(cells: np.ndarray, instance: Instance) -> SimpleNamespace:
    """Vectorized penalty evaluation over a (B, E, D) batch of schedules.

    Returns a namespace with per-schedule counts and the intermediate
    arrays (violation masks, coverage slack) reused by attribution and
    graph-feature construction.
    """
    cells = np.asarray(cells, dtype=np.int64)
    if cells.ndim == 2:
        cells = cells[None]
    B, E, D = cells.shape
    if (E, D) != instance.shape:
        raise InvalidInputError(
            f"schedule shape {(E, D)} does not match instance {instance.shape}"
        )
    S = instance.num_shifts
    worked = cells != ShiftCode.REST

    # C2: night followed by morning
    if D > 1:
        c2_pairs = (cells[:, :, :-1] == ShiftCode.NIGHT) & (
            cells[:, :, 1:] == ShiftCode.MORNING
        )
    else:
        c2_pairs = np.zeros((B, E, 0), dtype=bool)
    c2 = c2_pairs.sum(axis=(1, 2))

    # C3: total hours outside [min_hours, max_hours], once per employee
    worked_days = worked.sum(axis=2)
    hours = worked_days * instance.hours_per_shift
    c3_below = hours < instance.min_hours
    c3_above = hours > instance.max_hours
    c3 = (c3_below | c3_above).sum(axis=1)

    # C4: fully worked windows of max_consecutive + 1 days
    w = instance.max_consecutive + 1
    n_windows = D - instance.max_consecutive
    if n_windows > 0:
        cs = np.concatenate(
            [np.zeros((B, E, 1), dtype=np.int64), np.cumsum(worked, axis=2)], axis=2
        )
        win_sums = cs[:, :, w:] - cs[:, :, :-w]
        c4_windows = win_sums == w
    else:
        c4_windows = np.zeros((B, E, 0), dtype=bool)
    c4 = c4_windows.sum(axis=(1, 2))

    # C5: interior rest blocks of exact length t < min_rest flanked by work
    c5_blocks = {}
    c5 = np.zeros(B, dtype=np.int64)
    rest = ~worked
    rest_cs = np.concatenate(
        [np.zeros((B, E, 1), dtype=np.int64), np.cumsum(rest, axis=2)], axis=2
    )
    for t in range(1, instance.min_rest):
        span = D - t - 1
        if span <= 0:
            continue
        all_rest = (rest_cs[:, :, t + 1 : t + 1 + span] - rest_cs[:, :, 1 : 1 + span]) == t
        viol = worked[:, :, :span] & all_rest & worked[:, :, t + 1 :]
        c5_blocks[t] = viol
        c5 += viol.sum(axis=(1, 2))

    # Coverage slack per (day, shift)
    counts = np.stack(
        [(cells == s).sum(axis=1) for s in range(1, S + 1)], axis=2
    )  # (B, D, S)
    under = np.maximum(instance.coverage[None] - counts, 0)
    over = np.maximum(counts - instance.coverage[None], 0)
    cov_raw = (
        under * instance.understaff_weight + over * instance.overstaff_weight
    )  # (B, D, S)
    pref_per_emp = (worked * instance.pref_off[None]).sum(axis=2)  # (B, E)

    soft_unnormalized = cov_raw.sum(axis=(1, 2)) + pref_per_emp.sum(axis=1)
    denom = instance.soft_denominators()
    soft_normalized = (cov_raw / denom[None]).sum(axis=(1, 2)) + pref_per_emp.sum(
        axis=1
    ) / (1 + D)

    return SimpleNamespace(
        cells=cells,
        worked=worked,
        c2=c2,
        c3=c3,
        c4=c4,
        c5=c5,
        hard=c2 + c3 + c4 + c5,
        c2_pairs=c2_pairs,
        c3_below=c3_below,
        c3_above=c3_above,
        c4_windows=c4_windows,
        c5_blocks=c5_blocks,
        worked_days=worked_days,
        counts=counts,
        under=under,
        over=over,
        pref_per_emp=pref_per_emp,
        soft_unnormalized=soft_unnormalized,
        soft_normalized=soft_normalized,
    )


def evaluate(schedule: Schedule, instance: Instance) -> PenaltyReport:
    """Count hard-constraint violations and compute the soft objective."""
    cells = as_schedule(schedule, instance)
    ev = batch_penalties(cells[None], instance)
    per_ds = np.stack([ev.under[0], ev.over[0]], axis=2)
    return PenaltyReport(
        c2_count=int(ev.c2[0]),
        c3_count=int(ev.c3[0]),
        c4_count=int(ev.c4[0]),
        c5_count=int(ev.c5[0]),
        hard_total=int(ev.hard[0]),
        soft_unnormalized=int(ev.soft_unnormalized[0]),
        soft_normalized=float(ev.soft_normalized[0]),
        per_day_shift_coverage=per_ds,
        per_employee_pref=ev.pref_per_emp[0].copy(),
    )


def normalized_soft(report: PenaltyReport, instance: Instance) -> float:
    """Recompute the normalized soft penalty from a report's components."""
    under = report.per_day_shift_coverage[:, :, 0]
    over = report.per_day_shift_coverage[:, :, 1]
    raw = under * instance.understaff_weight + over * instance.overstaff_weight
    cov = (raw / instance.soft_denominators()).sum()
    pref = report.per_employee_pref.sum() / (1 + instance.num_days)
    return float(cov + pref)


def fitness(schedule: Schedule, instance: Instance) -> float:
    """Fitness = max_fitness - (hard violation count + normalized soft)."""
    report = evaluate(schedule, instance)
    cap = max_fitness(instance.num_employees, instance.num_days, instance.num_shifts)
    return cap - (report.hard_total + report.soft_normalized)


def is_optimal(schedule: Schedule, instance: Instance) -> bool:
    """True iff feasible and the soft objective hits the certified minimum."""
    if instance.reference_min_soft is None:
        raise ConfigurationError(
            "instance carries no reference_min_soft; certify it first"
        )
    report = evaluate(schedule, instance)
    return report.hard_total == 0 and (
        report.soft_unnormalized == instance.reference_min_soft
    )


def batch_cell_scores(cells: np.ndarray, instance: Instance) -> np.ndarray:
    """Vectorized per-cell penalty attribution over a (B, E, D) batch."""
    ev = batch_penalties(cells, instance)
    B, E, D = ev.cells.shape
    scores = np.zeros((B, E, D), dtype=np.float64)

    # C2: both cells of every violated pair
    if D > 1:
        scores[:, :, :-1] += ev.c2_pairs
        scores[:, :, 1:] += ev.c2_pairs

    # C4: one unit per violated window containing the cell
    w = instance.max_consecutive + 1
    for t in range(ev.c4_windows.shape[2]):
        scores[:, :, t : t + w] += ev.c4_windows[:, :, t : t + 1]

    # C5: flanking work days and interior rest days of each violation
    for t, viol in ev.c5_blocks.items():
        span = viol.shape[2]
        for off in range(t + 2):
            scores[:, :, off : off + span] += viol

    # C3: one unit spread over the culpable cells of each violating employee
    rest_days = D - ev.worked_days
    above_share = np.divide(
        1.0,
        ev.worked_days,
        out=np.zeros((B, E), dtype=np.float64),
        where=ev.worked_days > 0,
    )
    below_share = np.divide(
        1.0, rest_days, out=np.zeros((B, E), dtype=np.float64), where=rest_days > 0
    )
    scores += (ev.c3_above * above_share)[:, :, None] * ev.worked
    scores += (ev.c3_below * below_share)[:, :, None] * ~ev.worked

    # Preference share for worked cells on requested days off
    scores += ev.worked * instance.pref_off[None] / (1 + D)

    # Overstaffing share, split among the employees assigned to the slot.
    # Understaffing is deliberately left unattributed: no single rest cell
    # owns the gap.
    denom = instance.soft_denominators()
    over_term = ev.over * instance.overstaff_weight / denom[None]  # (B, D, S)
    over_share = over_term / np.maximum(ev.counts, 1)
    for s in range(1, instance.num_shifts + 1):
        scores += (ev.cells == s) * over_share[:, None, :, s - 1]

    return scores


def cell_penalty_scores(schedule: Schedule, instance: Instance) -> np.ndarray:
    """Deterministic per-cell attribution of hard and soft penalties."""
    cells = as_schedule(schedule, instance)
    return batch_cell_scores(cells[None], instance)[0]
