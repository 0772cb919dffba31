"""Improvement operators and the heterogeneous-graph wire bridge.

A schedule improvement operator maps a batch of schedules to an
equally-sized, order-preserving batch for the same instance.  Three
implementations ship here: an identity pass-through, a deterministic greedy
repair, and a client for an out-of-process neural operator speaking
newline-delimited JSON (protocol v1).

Graph encoding (frozen; see tests/data/golden_payload.json):

* one employee node per employee, one day node per day, one shift node per
  (employee, day) cell at index ``e * D + d``;
* bidirectional shift-employee, shift-day, and consecutive-day shift-shift
  relations, each edge list holding all forward pairs then all reverse
  pairs;
* 17 features per node: [0:2) node-type code (employee 0,0; day 0,1;
  shift 1,0), [2:5) employee block (hours ratio, below/above hour-bound
  flags), [5:15) shift block (code one-hot, C2/C4/C5 participation flags,
  work-streak and interior-rest-streak ratios, day-off preference flag),
  [15:17) day block (summed normalized under/overstaffing).  Blocks not
  matching the node type stay zero; ratios are clamped to [0, 2].
"""

from __future__ import annotations

import json
import socket
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, OperatorFailureError
from .model import (
    Instance,
    NUM_CODES,
    Schedule,
    as_schedule,
    batch_cell_scores,
    batch_penalties,
)

FEATURE_DIM = 17
PROTOCOL_VERSION = 1


@dataclass
class GraphPayload:
    employee_feats: np.ndarray  # (E, 17)
    day_feats: np.ndarray  # (D, 17)
    shift_feats: np.ndarray  # (E*D, 17)
    edges_se: np.ndarray  # (2*E*D, 2) shift<->employee
    edges_sd: np.ndarray  # (2*E*D, 2) shift<->day
    edges_ss: np.ndarray  # (2*E*(D-1), 2) consecutive-day shift<->shift
    meta: tuple[int, int, int]  # (E, D, feature_dim)


def _streaks(worked: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Work streak ending per cell and interior rest streak ending per cell."""
    B, E, D = worked.shape
    work_streak = np.zeros((B, E, D), dtype=np.int64)
    rest_streak = np.zeros((B, E, D), dtype=np.int64)
    started_after_work = np.zeros((B, E, D), dtype=bool)
    followed_by_work = np.zeros((B, E, D), dtype=bool)
    for d in range(D):
        if d == 0:
            work_streak[:, :, 0] = worked[:, :, 0]
            rest_streak[:, :, 0] = ~worked[:, :, 0]
        else:
            work_streak[:, :, d] = (work_streak[:, :, d - 1] + 1) * worked[:, :, d]
            rest_streak[:, :, d] = (rest_streak[:, :, d - 1] + 1) * ~worked[:, :, d]
            started_after_work[:, :, d] = ~worked[:, :, d] & np.where(
                worked[:, :, d - 1], True, started_after_work[:, :, d - 1]
            )
    for d in range(D - 2, -1, -1):
        followed_by_work[:, :, d] = ~worked[:, :, d] & (
            worked[:, :, d + 1] | followed_by_work[:, :, d + 1]
        )
    interior = started_after_work & followed_by_work
    return work_streak, rest_streak * interior


def build_graph(schedule: Schedule, instance: Instance) -> GraphPayload:
    """Heterogeneous graph payload for one schedule (feature layout above)."""
    cells = as_schedule(schedule, instance)
    E, D = instance.shape
    ev = batch_penalties(cells[None], instance)
    worked = ev.worked

    employee = np.zeros((E, FEATURE_DIM))
    day = np.zeros((D, FEATURE_DIM))
    shift = np.zeros((E * D, FEATURE_DIM))

    # node-type codes
    day[:, 1] = 1.0
    shift[:, 0] = 1.0

    # employee block [2:5)
    hours = ev.worked_days[0] * instance.hours_per_shift
    employee[:, 2] = np.clip(hours / max(instance.max_hours, 1), 0.0, 2.0)
    employee[:, 3] = ev.c3_below[0]
    employee[:, 4] = ev.c3_above[0]

    # shift block [5:15)
    one_hot = np.eye(NUM_CODES)[cells]  # (E, D, 4)
    shift[:, 5:9] = one_hot.reshape(E * D, NUM_CODES)

    c2_flag = np.zeros((E, D), dtype=bool)
    if D > 1:
        pairs = ev.c2_pairs[0]
        c2_flag[:, :-1] |= pairs
        c2_flag[:, 1:] |= pairs
    c4_flag = np.zeros((E, D), dtype=bool)
    w = instance.max_consecutive + 1
    for t in range(ev.c4_windows.shape[2]):
        c4_flag[:, t : t + w] |= ev.c4_windows[0, :, t : t + 1]
    c5_flag = np.zeros((E, D), dtype=bool)
    for t, viol in ev.c5_blocks.items():
        span = viol.shape[2]
        for off in range(t + 2):
            c5_flag[:, off : off + span] |= viol[0]
    shift[:, 9] = c2_flag.reshape(-1)
    shift[:, 10] = c4_flag.reshape(-1)
    shift[:, 11] = c5_flag.reshape(-1)

    work_streak, interior_rest = _streaks(worked)
    shift[:, 12] = np.clip(
        work_streak[0].reshape(-1) / instance.max_consecutive, 0.0, 2.0
    )
    shift[:, 13] = np.clip(
        interior_rest[0].reshape(-1) / instance.min_rest, 0.0, 2.0
    )
    shift[:, 14] = instance.pref_off.reshape(-1)

    # day block [15:17)
    denom = instance.soft_denominators()
    under_norm = (ev.under[0] * instance.understaff_weight / denom).sum(axis=1)
    over_norm = (ev.over[0] * instance.overstaff_weight / denom).sum(axis=1)
    day[:, 15] = np.clip(under_norm, 0.0, 2.0)
    day[:, 16] = np.clip(over_norm, 0.0, 2.0)

    shift_idx = np.arange(E * D)
    emp_of = shift_idx // D
    day_of = shift_idx % D
    fwd_se = np.stack([shift_idx, emp_of], axis=1)
    fwd_sd = np.stack([shift_idx, day_of], axis=1)
    edges_se = np.concatenate([fwd_se, fwd_se[:, ::-1]])
    edges_sd = np.concatenate([fwd_sd, fwd_sd[:, ::-1]])
    if D > 1:
        left = np.array(
            [e * D + d for e in range(E) for d in range(D - 1)], dtype=np.int64
        )
        fwd_ss = np.stack([left, left + 1], axis=1)
        edges_ss = np.concatenate([fwd_ss, fwd_ss[:, ::-1]])
    else:
        edges_ss = np.zeros((0, 2), dtype=np.int64)

    return GraphPayload(
        employee_feats=employee,
        day_feats=day,
        shift_feats=shift,
        edges_se=edges_se,
        edges_sd=edges_sd,
        edges_ss=edges_ss,
        meta=(E, D, FEATURE_DIM),
    )


def payload_to_dict(payload: GraphPayload) -> dict:
    return {
        "employee_feats": payload.employee_feats.tolist(),
        "day_feats": payload.day_feats.tolist(),
        "shift_feats": payload.shift_feats.tolist(),
        "edges_se": payload.edges_se.tolist(),
        "edges_sd": payload.edges_sd.tolist(),
        "edges_ss": payload.edges_ss.tolist(),
    }


def payload_to_json(payload: GraphPayload) -> str:
    """Canonical serialization used by the wire protocol and golden tests."""
    return json.dumps(payload_to_dict(payload), sort_keys=True, separators=(",", ":"))


class ImprovementOperator:
    """Batch schedule transformation; preserves length and order."""

    def improve(self, batch: list[Schedule], instance: Instance) -> list[Schedule]:
        raise NotImplementedError

    def close(self) -> None:
        pass


class IdentityOperator(ImprovementOperator):
    def improve(self, batch, instance):
        return [as_schedule(s, instance).copy() for s in batch]


class RepairOperator(ImprovementOperator):
    """Greedy repair: retarget the worst-scoring cell until nothing improves.

    Each schedule's trajectory is independent; the batch advances in
    lockstep so every step costs two vectorized evaluations regardless of
    batch size.
    """

    def improve(self, batch, instance):
        if not batch:
            return []
        cells = np.stack([as_schedule(s, instance) for s in batch]).copy()
        B, E, D = cells.shape
        ev = batch_penalties(cells, instance)
        cur_hard = ev.hard.astype(np.int64)
        cur_soft = ev.soft_unnormalized.astype(np.int64)
        active = np.ones(B, dtype=bool)
        for _ in range(E * D):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            sub = cells[idx]
            A = idx.size
            scores = batch_cell_scores(sub, instance)
            flat = scores.reshape(A, -1).argmax(axis=1)
            e_sel, d_sel = np.divmod(flat, D)
            rows = np.arange(A)
            variants = np.repeat(sub[:, None], NUM_CODES, axis=1)
            variants[rows[:, None], np.arange(NUM_CODES)[None, :],
                     e_sel[:, None], d_sel[:, None]] = np.arange(NUM_CODES)[None, :]
            vev = batch_penalties(variants.reshape(-1, E, D), instance)
            vh = vev.hard.reshape(A, NUM_CODES)
            vs = vev.soft_unnormalized.reshape(A, NUM_CODES)
            cur_codes = sub[rows, e_sel, d_sel]
            for k in range(A):
                keys = [
                    (int(vh[k, c]), int(vs[k, c]), c != cur_codes[k], c)
                    for c in range(NUM_CODES)
                ]
                best = min(range(NUM_CODES), key=lambda c: keys[c])
                i = idx[k]
                if (keys[best][0], keys[best][1]) >= (cur_hard[i], cur_soft[i]):
                    active[i] = False
                else:
                    cells[i, e_sel[k], d_sel[k]] = best
                    cur_hard[i] = keys[best][0]
                    cur_soft[i] = keys[best][1]
        return list(cells)


class NeuralOperator(ImprovementOperator):
    """Client for a neural improvement server speaking protocol v1.

    One request per improve() call carries the whole batch; responses are
    order-preserving.  Requests on one connection are serialized.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0):
        host, _, port = endpoint.rpartition(":")
        if not host or not port.isdigit():
            raise InvalidInputError(f"endpoint must be host:port, got {endpoint!r}")
        self._host = host
        self._port = int(port)
        self._timeout = timeout
        self._sock = None
        self._file = None
        self._next_id = 0

    def _connect(self):
        try:
            self._sock = socket.create_connection(
                (self._host, self._port), timeout=self._timeout
            )
            self._file = self._sock.makefile("rwb")
            self._send({"hello": 1, "protocol": PROTOCOL_VERSION})
            reply = self._recv()
            if not reply.get("ready") or reply.get("protocol") != PROTOCOL_VERSION:
                raise OperatorFailureError(f"unexpected handshake reply: {reply}")
        except OSError as exc:
            self.close()
            raise OperatorFailureError(f"cannot reach neural server: {exc}") from exc

    def _send(self, obj: dict):
        self._file.write(json.dumps(obj, separators=(",", ":")).encode() + b"\n")
        self._file.flush()

    def _recv(self) -> dict:
        line = self._file.readline()
        if not line:
            raise OperatorFailureError("neural server closed the connection")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise OperatorFailureError(f"malformed server response: {exc}") from exc

    def improve(self, batch, instance):
        if not batch:
            return []
        if self._sock is None:
            self._connect()
        E, D = instance.shape
        request = {
            "id": self._next_id,
            "meta": {"employees": E, "days": D, "feature_dim": FEATURE_DIM},
            "graphs": [payload_to_dict(build_graph(s, instance)) for s in batch],
        }
        self._next_id += 1
        try:
            self._send(request)
            reply = self._recv()
        except OSError as exc:
            raise OperatorFailureError(f"neural request failed: {exc}") from exc
        if "error" in reply:
            raise OperatorFailureError(f"neural server error: {reply['error']}")
        if reply.get("id") != request["id"]:
            raise OperatorFailureError(
                f"response id {reply.get('id')} does not match request {request['id']}"
            )
        schedules = reply.get("schedules")
        if not isinstance(schedules, list) or len(schedules) != len(batch):
            raise OperatorFailureError("response batch size mismatch")
        out = []
        for k, matrix in enumerate(schedules):
            arr = np.asarray(matrix, dtype=np.int64)
            if arr.shape != (E, D) or arr.min() < 0 or arr.max() >= NUM_CODES:
                raise OperatorFailureError(f"response schedule {k} has bad shape/codes")
            out.append(arr)
        return out

    def close(self):
        if self._file is not None:
            try:
                self._file.close()
            except OSError:
                pass
            self._file = None
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None


def identity_operator() -> ImprovementOperator:
    return IdentityOperator()


def repair_operator() -> ImprovementOperator:
    return RepairOperator()


def neural_operator(endpoint: str, timeout: float = 30.0) -> ImprovementOperator:
    return NeuralOperator(endpoint, timeout=timeout)
