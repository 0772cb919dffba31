"""Exact optimization at desk scale plus the LP bridge to external solvers.

Tiny instances are certified by per-employee feasible-pattern enumeration
followed by depth-first branch and bound over pattern choices.  Larger
instances are exported in the plain-text LP format and certified by an
external MILP solver whose solution file is imported back.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CapacityError,
    InfeasibleInstanceError,
    InvalidSolutionError,
)
from .model import (
    Instance,
    NUM_CODES,
    Schedule,
    ShiftCode,
    evaluate,
)

_ENUMERATION_CAP = 2**24
_DEFAULT_NODE_BUDGET = 100_000_000
_DP_STATE_CAP = 1 << 19


@dataclass
class EmployeePattern:
    """A single-employee row satisfying C2-C5, with its preference cost."""

    row: np.ndarray
    pref_cost: int


@dataclass
class OracleResult:
    schedule: Schedule
    min_soft: int
    node_count: int
    proven: bool


def enumerate_patterns(instance: Instance, employee: int) -> list[EmployeePattern]:
    """All feasible rows for one employee, in lexicographic code order."""
    D = instance.num_days
    if (instance.num_shifts + 1) ** D > _ENUMERATION_CAP:
        raise CapacityError(f"horizon of {D} days is too large to enumerate")
    hps = instance.hours_per_shift
    cmax = instance.max_consecutive
    omin = instance.min_rest
    bmin, bmax = instance.min_hours, instance.max_hours
    pref = instance.pref_off[employee]
    max_workdays = bmax // hps

    patterns: list[EmployeePattern] = []
    row = np.zeros(D, dtype=np.int64)

    def descend(d, last, work_streak, rest_len, rest_interior, worked):
        if d == D:
            if worked * hps >= bmin:
                patterns.append(
                    EmployeePattern(row.copy(), int((pref * (row != 0)).sum()))
                )
            return
        remaining = D - d - 1
        for code in range(NUM_CODES):
            if code == ShiftCode.REST:
                # resting cannot leave enough days to reach the lower bound
                if (worked + remaining) * hps < bmin:
                    continue
                if rest_len > 0:
                    new_rest, new_interior = rest_len + 1, rest_interior
                else:
                    new_rest, new_interior = 1, last != ShiftCode.REST and d > 0
                row[d] = code
                descend(d + 1, code, 0, new_rest, new_interior, worked)
            else:
                if last == ShiftCode.NIGHT and code == ShiftCode.MORNING:
                    continue
                if rest_interior and 0 < rest_len < omin:
                    continue  # closing a short interior rest block
                if work_streak + 1 > cmax:
                    continue
                if worked + 1 > max_workdays:
                    continue
                row[d] = code
                descend(d + 1, code, work_streak + 1, 0, False, worked + 1)
        row[d] = 0

    descend(0, ShiftCode.REST, 0, 0, False, 0)
    return patterns


def solve_exact(instance: Instance, budget: int = _DEFAULT_NODE_BUDGET) -> OracleResult:
    """Certified minimum soft objective over per-employee feasible patterns.

    Two exact engines sit behind one contract: a dynamic program over
    coverage counts capped at the targets (chosen when that state space is
    small, e.g. the floor-division coverage family), and depth-first branch
    and bound over pattern choices otherwise.  `budget` caps search effort;
    an exhausted search returns its incumbent with ``proven=False``.
    """
    E, D = instance.shape
    if E > 8:
        raise CapacityError("solve_exact supports at most 8 employees")
    S = instance.num_shifts
    u = instance.coverage

    per_employee: list[list[EmployeePattern]] = []
    indicators: list[np.ndarray] = []
    for e in range(E):
        pats = enumerate_patterns(instance, e)
        if not pats:
            raise InfeasibleInstanceError(f"employee {e} has no feasible row")
        pats.sort(key=lambda p: (p.pref_cost, tuple(p.row)))
        per_employee.append(pats)
        ind = np.zeros((len(pats), D, S), dtype=np.int64)
        for k, pat in enumerate(pats):
            for d in range(D):
                if pat.row[d] != 0:
                    ind[k, d, pat.row[d] - 1] = 1
        indicators.append(ind)

    state_count = int(np.prod((u + 1).astype(np.float64).reshape(-1)))
    total_patterns = sum(len(p) for p in per_employee)
    if state_count <= _DP_STATE_CAP and state_count * total_patterns <= budget:
        return _solve_dp(instance, per_employee, indicators)
    return _solve_bnb(instance, per_employee, indicators, budget)


def _solve_dp(
    instance: Instance,
    per_employee: list[list[EmployeePattern]],
    indicators: list[np.ndarray],
) -> OracleResult:
    """Exact DP over coverage counts capped at the targets.

    Assignments beyond a slot's target cost the overstaffing weight
    immediately, so capped counts fully determine the remaining objective:
    terminal understaffing is (target - capped count) per slot.
    """
    E, D = instance.shape
    S = instance.num_shifts
    vmin, vmax = instance.understaff_weight, instance.overstaff_weight
    u_flat = instance.coverage.reshape(-1)
    C = u_flat.size
    radix = u_flat + 1
    steps = np.concatenate([[1], np.cumprod(radix[:-1])]).astype(np.int64)
    K = int(np.prod(radix))
    digits = (np.arange(K)[:, None] // steps[None, :]) % radix[None, :]
    flat_ind = [ind.reshape(len(ind), -1) for ind in indicators]

    INF = np.iinfo(np.int64).max // 4
    best = np.full(K, INF, dtype=np.int64)
    best[0] = 0
    choices: list[np.ndarray] = []
    preds: list[np.ndarray] = []
    transitions = 0
    for e in range(E):
        rows = np.flatnonzero(best < INF)
        dsub = digits[rows]
        bsub = best[rows]
        new_best = np.full(K, INF, dtype=np.int64)
        new_choice = np.full(K, -1, dtype=np.int64)
        new_pred = np.full(K, -1, dtype=np.int64)
        for k, pat in enumerate(per_employee[e]):
            cells = np.flatnonzero(flat_ind[e][k])
            transitions += len(rows)
            if len(cells):
                dcells = dsub[:, cells]
                caps = u_flat[cells]
                over = (dcells == caps).sum(axis=1)
                delta = ((dcells < caps) * steps[cells]).sum(axis=1)
            else:
                over = np.zeros(len(rows), dtype=np.int64)
                delta = np.zeros(len(rows), dtype=np.int64)
            target = rows + delta
            cand = bsub + over * vmax + pat.pref_cost
            np.minimum.at(new_best, target, cand)
            won = new_best[target] == cand
            new_choice[target[won]] = k
            new_pred[target[won]] = rows[won]
        best = new_best
        choices.append(new_choice)
        preds.append(new_pred)

    totals = best + (u_flat.sum() - digits.sum(axis=1)) * vmin
    totals[best >= INF] = INF
    final_state = int(np.argmin(totals))
    min_soft = int(totals[final_state])

    rows_out: list[np.ndarray | None] = [None] * E
    state = final_state
    for e in range(E - 1, -1, -1):
        k = int(choices[e][state])
        rows_out[e] = per_employee[e][k].row.copy()
        state = int(preds[e][state])

    return OracleResult(
        schedule=np.stack(rows_out),
        min_soft=min_soft,
        node_count=transitions,
        proven=True,
    )


def _solve_bnb(
    instance: Instance,
    per_employee: list[list[EmployeePattern]],
    indicators: list[np.ndarray],
    budget: int,
) -> OracleResult:
    """Depth-first branch and bound, employees in index order.

    Patterns are tried in ascending preference-cost order.  The bound
    combines committed preference and overstaffing costs, the cheapest
    possible preference cost of the unassigned employees, and a per-day
    understaffing relaxation (each remaining employee covers at most one
    shift per day).
    """
    E, D = instance.shape
    S = instance.num_shifts
    u = instance.coverage
    vmin, vmax = instance.understaff_weight, instance.overstaff_weight

    best_cost = np.inf
    best_rows: list[np.ndarray] | None = None
    node_count = 0
    exhausted = False
    chosen: list[int] = [0] * E

    flat_ind = [ind.reshape(len(ind), -1) for ind in indicators]
    pref_arr = [np.array([p.pref_cost for p in pats]) for pats in per_employee]
    u_flat = u.reshape(-1)
    # cheapest preference cost any pattern of employees e.. can incur
    min_pref_suffix = np.zeros(E + 1, dtype=np.int64)
    for e in range(E - 1, -1, -1):
        min_pref_suffix[e] = min_pref_suffix[e + 1] + per_employee[e][0].pref_cost

    def coverage_cost(counts: np.ndarray) -> int:
        under = np.maximum(u - counts, 0)
        over = np.maximum(counts - u, 0)
        return int((under * vmin + over * vmax).sum())

    def lower_bound(counts: np.ndarray, pref_acc: int, next_e: int) -> int:
        remaining = E - next_e
        day_deficit = np.maximum(u - counts, 0).sum(axis=1)
        under = np.maximum(day_deficit - remaining, 0).sum() * vmin
        over = (np.maximum(counts - u, 0) * vmax).sum()
        return pref_acc + int(min_pref_suffix[next_e]) + under + int(over)

    def descend(e: int, counts: np.ndarray, pref_acc: int) -> None:
        nonlocal best_cost, best_rows, node_count, exhausted
        if exhausted:
            return
        if e == E - 1:
            # last level: score every remaining pattern in one sweep; the
            # first minimum matches the sequential first-improvement order
            n_pats = len(pref_arr[e])
            node_count += n_pats
            if node_count > budget:
                exhausted = True
                return
            leaf_counts = counts.reshape(-1)[None, :] + flat_ind[e]
            soft = (
                np.maximum(u_flat - leaf_counts, 0) * vmin
                + np.maximum(leaf_counts - u_flat, 0) * vmax
            ).sum(axis=1) + pref_acc + pref_arr[e]
            k = int(np.argmin(soft))
            if soft[k] < best_cost:
                best_cost = int(soft[k])
                chosen[e] = k
                best_rows = [per_employee[i][chosen[i]].row.copy() for i in range(E)]
            return
        for k, pat in enumerate(per_employee[e]):
            node_count += 1
            if node_count > budget:
                exhausted = True
                return
            new_counts = counts + indicators[e][k]
            new_pref = pref_acc + pat.pref_cost
            if lower_bound(new_counts, new_pref, e + 1) >= best_cost:
                continue
            chosen[e] = k
            descend(e + 1, new_counts, new_pref)
            if exhausted:
                return

    # Seed an incumbent greedily (each employee takes the pattern that is
    # cheapest against the coverage built so far) so pruning bites early
    # and a tiny budget still returns something.
    greedy_counts = np.zeros(D * S, dtype=np.int64)
    greedy_pref = 0
    greedy_rows = []
    greedy_choice = []
    for e in range(E):
        cand = greedy_counts[None, :] + flat_ind[e]
        cost = (
            np.maximum(u_flat - cand, 0) * vmin
            + np.maximum(cand - u_flat, 0) * vmax
        ).sum(axis=1) + pref_arr[e]
        k = int(np.argmin(cost))
        greedy_choice.append(k)
        greedy_counts = greedy_counts + flat_ind[e][k]
        greedy_pref += per_employee[e][k].pref_cost
        greedy_rows.append(per_employee[e][k].row.copy())
    best_cost = greedy_pref + coverage_cost(greedy_counts.reshape(D, S))
    best_rows = greedy_rows

    descend(0, np.zeros((D, S), dtype=np.int64), 0)

    schedule = np.stack(best_rows)
    return OracleResult(
        schedule=schedule,
        min_soft=int(best_cost),
        node_count=node_count,
        proven=not exhausted,
    )


def _x(e: int, d: int, s: int) -> str:
    return f"x_{e + 1}_{d + 1}_{s + 1}"


def export_lp(instance: Instance, path) -> None:
    """Write the integer-programming formulation in plain LP text format."""
    E, D = instance.shape
    S = instance.num_shifts
    u = instance.coverage
    vmin, vmax = instance.understaff_weight, instance.overstaff_weight
    hps = instance.hours_per_shift
    cmax, omin = instance.max_consecutive, instance.min_rest

    lines = ["Minimize"]
    terms = []
    for d in range(D):
        for s in range(S):
            if vmin:
                terms.append(f"{vmin} y_{d + 1}_{s + 1}")
            if vmax:
                terms.append(f"{vmax} z_{d + 1}_{s + 1}")
    for e in range(E):
        for d in range(D):
            if instance.pref_off[e, d]:
                for s in range(S):
                    terms.append(_x(e, d, s))
    lines.append(" obj: " + " + ".join(terms) if terms else " obj:")

    lines.append("Subject To")
    for e in range(E):
        for d in range(D):
            expr = " + ".join(_x(e, d, s) for s in range(S))
            lines.append(f" c1_{e + 1}_{d + 1}: {expr} <= 1")
    for e in range(E):
        for d in range(D - 1):
            lines.append(
                f" c2_{e + 1}_{d + 1}: {_x(e, d, S - 1)} + {_x(e, d + 1, 0)} <= 1"
            )
    for e in range(E):
        expr = " + ".join(f"{hps} {_x(e, d, s)}" for d in range(D) for s in range(S))
        lines.append(f" c3lo_{e + 1}: {expr} >= {instance.min_hours}")
        lines.append(f" c3hi_{e + 1}: {expr} <= {instance.max_hours}")
    for e in range(E):
        for t in range(D - cmax):
            expr = " + ".join(
                _x(e, d, s) for d in range(t, t + cmax + 1) for s in range(S)
            )
            lines.append(f" c4_{e + 1}_{t + 1}: {expr} <= {cmax}")
    for e in range(E):
        for t in range(1, omin):
            for d in range(D - t - 1):
                neg = [_x(e, d, s) for s in range(S)]
                neg += [_x(e, d + t + 1, s) for s in range(S)]
                pos = [_x(e, j, s) for j in range(d + 1, d + t + 1) for s in range(S)]
                expr = " + ".join(pos) + " - " + " - ".join(neg) if pos else "- " + " - ".join(neg)
                lines.append(f" c5_{e + 1}_{t}_{d + 1}: {expr} >= -1")
    for d in range(D):
        for s in range(S):
            expr = " + ".join(_x(e, d, s) for e in range(E))
            lines.append(f" covy_{d + 1}_{s + 1}: y_{d + 1}_{s + 1} + {expr} >= {u[d, s]}")
            lines.append(f" covz_{d + 1}_{s + 1}: z_{d + 1}_{s + 1} - {expr} >= {-u[d, s]}")

    lines.append("Bounds")
    for d in range(D):
        for s in range(S):
            lines.append(f" 0 <= y_{d + 1}_{s + 1}")
            lines.append(f" 0 <= z_{d + 1}_{s + 1}")

    lines.append("Binaries")
    for e in range(E):
        for d in range(D):
            for s in range(S):
                lines.append(f" {_x(e, d, s)}")
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n")


def import_solution(instance: Instance, path) -> tuple[Schedule, int]:
    """Rebuild a schedule from `x_e_d_s value` lines and certify it.

    The imported schedule must be feasible; its soft objective is stored on
    the instance as ``reference_min_soft``.
    """
    E, D = instance.shape
    S = instance.num_shifts
    cells = np.zeros((E, D), dtype=np.int64)
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", "\\")):
            continue
        parts = line.split()
        if not parts[0].startswith("x_"):
            continue
        if len(parts) != 2:
            raise InvalidSolutionError(f"line {lineno}: expected 'name value'")
        try:
            _, e_s, d_s, s_s = parts[0].split("_")
            e, d, s = int(e_s) - 1, int(d_s) - 1, int(s_s) - 1
            value = float(parts[1])
        except ValueError as exc:
            raise InvalidSolutionError(f"line {lineno}: {raw!r}") from exc
        if not (0 <= e < E and 0 <= d < D and 0 <= s < S):
            raise InvalidSolutionError(f"line {lineno}: index out of range")
        if value > 0.5:
            if cells[e, d] != 0:
                raise InvalidSolutionError(
                    f"employee {e + 1} day {d + 1}: two shifts on the same day "
                    "(C1 violated)"
                )
            cells[e, d] = s + 1
    report = evaluate(cells, instance)
    if report.hard_total > 0:
        violated = [
            name
            for name, count in (
                ("C2", report.c2_count),
                ("C3", report.c3_count),
                ("C4", report.c4_count),
                ("C5", report.c5_count),
            )
            if count
        ]
        raise InvalidSolutionError(
            f"imported schedule is infeasible ({', '.join(violated)} violated)"
        )
    instance.reference_min_soft = report.soft_unnormalized
    return cells, report.soft_unnormalized
