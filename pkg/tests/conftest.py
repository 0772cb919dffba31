"""Shared fixtures and independent reference implementations.

The naive checker below walks the constraint definitions with plain Python
loops and is kept deliberately free of any package internals; production
code is verified against it, never the other way around.
"""

from __future__ import annotations

import numpy as np
import pytest

from rosterga.model import Instance


def naive_report(schedule, inst: Instance) -> dict:
    """Literal per-instantiation constraint counting and objective."""
    s = np.asarray(schedule)
    E, D = inst.num_employees, inst.num_days
    S = inst.num_shifts

    c2 = 0
    for e in range(E):
        for d in range(D - 1):
            if s[e][d] == 3 and s[e][d + 1] == 1:
                c2 += 1

    c3 = 0
    for e in range(E):
        hours = inst.hours_per_shift * sum(1 for d in range(D) if s[e][d] != 0)
        if not (inst.min_hours <= hours <= inst.max_hours):
            c3 += 1

    c4 = 0
    for e in range(E):
        for t in range(D - inst.max_consecutive):
            if all(s[e][d] != 0 for d in range(t, t + inst.max_consecutive + 1)):
                c4 += 1

    c5 = 0
    for e in range(E):
        for t in range(1, inst.min_rest):
            for d in range(D - t - 1):
                left = 1 - (1 if s[e][d] != 0 else 0)
                mid = sum(1 for j in range(d + 1, d + t + 1) if s[e][j] != 0)
                right = 1 - (1 if s[e][d + t + 1] != 0 else 0)
                if left + mid + right == 0:
                    c5 += 1

    under = [[0] * S for _ in range(D)]
    over = [[0] * S for _ in range(D)]
    for d in range(D):
        for sh in range(1, S + 1):
            n = sum(1 for e in range(E) if s[e][d] == sh)
            under[d][sh - 1] = max(0, int(inst.coverage[d][sh - 1]) - n)
            over[d][sh - 1] = max(0, n - int(inst.coverage[d][sh - 1]))

    pref = [0] * E
    for e in range(E):
        for d in range(D):
            if s[e][d] != 0 and inst.pref_off[e][d] == 1:
                pref[e] += 1

    soft = (
        sum(
            under[d][sh] * inst.understaff_weight + over[d][sh] * inst.overstaff_weight
            for d in range(D)
            for sh in range(S)
        )
        + sum(pref)
    )
    return {
        "c2": c2,
        "c3": c3,
        "c4": c4,
        "c5": c5,
        "hard": c2 + c3 + c4 + c5,
        "soft": soft,
        "under": under,
        "over": over,
        "pref": pref,
    }


def naive_cell_scores(schedule, inst: Instance) -> np.ndarray:
    """Literal-loop re-implementation of the per-cell attribution rules."""
    s = np.asarray(schedule)
    E, D = inst.num_employees, inst.num_days
    S = inst.num_shifts
    scores = np.zeros((E, D))

    for e in range(E):
        for d in range(D - 1):
            if s[e][d] == 3 and s[e][d + 1] == 1:
                scores[e][d] += 1.0
                scores[e][d + 1] += 1.0

    for e in range(E):
        for t in range(D - inst.max_consecutive):
            if all(s[e][x] != 0 for x in range(t, t + inst.max_consecutive + 1)):
                for x in range(t, t + inst.max_consecutive + 1):
                    scores[e][x] += 1.0

    for e in range(E):
        for t in range(1, inst.min_rest):
            for d in range(D - t - 1):
                if (
                    s[e][d] != 0
                    and all(s[e][j] == 0 for j in range(d + 1, d + t + 1))
                    and s[e][d + t + 1] != 0
                ):
                    for x in range(d, d + t + 2):
                        scores[e][x] += 1.0

    for e in range(E):
        worked = sum(1 for d in range(D) if s[e][d] != 0)
        hours = worked * inst.hours_per_shift
        if hours > inst.max_hours:
            for d in range(D):
                if s[e][d] != 0:
                    scores[e][d] += 1.0 / worked
        elif hours < inst.min_hours:
            rest = D - worked
            for d in range(D):
                if s[e][d] == 0:
                    scores[e][d] += 1.0 / rest

    for e in range(E):
        for d in range(D):
            if s[e][d] != 0 and inst.pref_off[e][d] == 1:
                scores[e][d] += 1.0 / (1 + D)

    for d in range(D):
        for sh in range(1, S + 1):
            n = sum(1 for e in range(E) if s[e][d] == sh)
            u = int(inst.coverage[d][sh - 1])
            if n > u:
                denom = 1 + max(
                    u * inst.understaff_weight, (E - u) * inst.overstaff_weight
                )
                term = (n - u) * inst.overstaff_weight / denom
                for e in range(E):
                    if s[e][d] == sh:
                        scores[e][d] += term / n
    return scores


def random_instance(rng, max_e=6, max_d=6) -> Instance:
    """Small random instance with varied parameters for oracle sweeps."""
    E = int(rng.integers(1, max_e + 1))
    D = int(rng.integers(1, max_d + 1))
    min_h = int(rng.integers(0, D + 1)) * 8
    max_h = int(rng.integers(min_h // 8, D + 1)) * 8
    return Instance(
        num_employees=E,
        num_days=D,
        min_hours=min_h,
        max_hours=max_h,
        max_consecutive=int(rng.integers(1, D + 2)),
        min_rest=int(rng.integers(1, 4)),
        understaff_weight=int(rng.integers(0, 101)),
        overstaff_weight=int(rng.integers(0, 4)),
        coverage=rng.integers(0, E + 1, size=(D, 3)),
        pref_off=rng.integers(0, 2, size=(E, D)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
