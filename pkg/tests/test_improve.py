"""Improvement operators and the graph payload bridge."""

from pathlib import Path

import numpy as np
import pytest

from rosterga.errors import OperatorFailureError
from rosterga.generate import gen_instance
from rosterga.improve import (
    FEATURE_DIM,
    build_graph,
    identity_operator,
    neural_operator,
    payload_to_json,
    repair_operator,
)
from rosterga.model import Instance, evaluate

from stub_server import (
    StubServer,
    argmax_echo_responder,
    constant_responder,
    error_responder,
)

DATA = Path(__file__).parent / "data"


def golden_instance():
    return Instance(
        num_employees=3, num_days=4, min_hours=8, max_hours=24,
        max_consecutive=2, min_rest=2, understaff_weight=100, overstaff_weight=1,
        coverage=np.array([[1, 1, 0], [1, 0, 1], [0, 1, 1], [1, 1, 1]]),
        pref_off=np.array([[0, 1, 0, 0], [1, 0, 0, 1], [0, 0, 1, 0]]),
    )


GOLDEN_SCHEDULE = np.array([[3, 1, 0, 2], [1, 1, 1, 0], [2, 0, 2, 0]])


class TestBuildGraph:
    def test_node_and_edge_counts(self):
        inst = gen_instance(2, 2, seed=0)
        payload = build_graph(np.zeros((2, 2), dtype=int), inst)
        assert payload.employee_feats.shape == (2, FEATURE_DIM)
        assert payload.day_feats.shape == (2, FEATURE_DIM)
        assert payload.shift_feats.shape == (4, FEATURE_DIM)
        assert len(payload.edges_se) == 8  # 4 links, both directions
        assert len(payload.edges_sd) == 8
        assert len(payload.edges_ss) == 4  # 2 consecutive links, both directions

    def test_clean_schedule_has_zero_flags(self):
        inst = Instance(
            num_employees=2, num_days=3, min_hours=0, max_hours=24,
            max_consecutive=5, min_rest=2, understaff_weight=100,
            overstaff_weight=1,
            coverage=np.array([[1, 1, 0], [1, 1, 0], [1, 1, 0]]),
            pref_off=np.zeros((2, 3), dtype=int),
        )
        schedule = np.array([[1, 1, 1], [2, 2, 2]])
        assert evaluate(schedule, inst).hard_total == 0
        assert evaluate(schedule, inst).soft_unnormalized == 0
        payload = build_graph(schedule, inst)
        assert (payload.shift_feats[:, 9:12] == 0).all()  # violation flags
        assert (payload.day_feats[:, 15:17] == 0).all()
        assert (payload.employee_feats[:, 3:5] == 0).all()

    def test_golden_payload_byte_identical(self):
        payload = build_graph(GOLDEN_SCHEDULE, golden_instance())
        frozen = (DATA / "golden_payload.json").read_text().strip()
        assert payload_to_json(payload) == frozen

    def test_features_bounded(self, rng):
        inst = gen_instance(4, 6, seed=3)
        for _ in range(20):
            schedule = rng.integers(0, 4, size=(4, 6))
            payload = build_graph(schedule, inst)
            for feats in (payload.employee_feats, payload.day_feats, payload.shift_feats):
                assert np.isfinite(feats).all()
                assert feats.min() >= 0.0
                assert feats.max() <= 2.0

    def test_employee_relabeling_equivariance(self, rng):
        inst = gen_instance(4, 5, seed=4)
        schedule = rng.integers(0, 4, size=(4, 5))
        perm = rng.permutation(4)
        permuted_inst = Instance(
            num_employees=4, num_days=5,
            min_hours=inst.min_hours, max_hours=inst.max_hours,
            max_consecutive=inst.max_consecutive, min_rest=inst.min_rest,
            understaff_weight=inst.understaff_weight,
            overstaff_weight=inst.overstaff_weight,
            coverage=inst.coverage, pref_off=inst.pref_off[perm],
        )
        a = build_graph(schedule, inst)
        b = build_graph(schedule[perm], permuted_inst)
        np.testing.assert_allclose(b.employee_feats, a.employee_feats[perm])
        shift_a = a.shift_feats.reshape(4, 5, FEATURE_DIM)
        shift_b = b.shift_feats.reshape(4, 5, FEATURE_DIM)
        np.testing.assert_allclose(shift_b, shift_a[perm])
        np.testing.assert_allclose(b.day_feats, a.day_feats)


class TestIdentityOperator:
    def test_returns_equal_batch(self, rng):
        inst = gen_instance(3, 4, seed=5)
        batch = [rng.integers(0, 4, size=(3, 4)) for _ in range(5)]
        out = identity_operator().improve(batch, inst)
        assert len(out) == 5
        for x, y in zip(batch, out):
            assert (x == y).all()
            assert y is not x and not np.shares_memory(x, y)

    def test_empty_batch(self):
        inst = gen_instance(3, 4, seed=5)
        assert identity_operator().improve([], inst) == []


class TestRepairOperator:
    def test_fixes_single_violation(self):
        coverage = np.zeros((5, 3), dtype=int)
        coverage[0, 2] = 1
        coverage[1, 0] = 1
        inst = Instance(
            num_employees=1, num_days=5, min_hours=0, max_hours=40,
            max_consecutive=5, min_rest=2, understaff_weight=100,
            overstaff_weight=1, coverage=coverage,
            pref_off=np.zeros((1, 5), dtype=int),
        )
        broken = np.array([[3, 1, 0, 0, 0]])  # single C2 violation
        assert evaluate(broken, inst).hard_total == 1
        (fixed,) = repair_operator().improve([broken], inst)
        assert evaluate(fixed, inst).hard_total == 0
        assert (fixed != broken).sum() == 1

    def test_clean_schedule_unchanged(self):
        inst = gen_instance(3, 5, seed=6)
        from rosterga.oracle import solve_exact

        optimal = solve_exact(inst).schedule
        (out,) = repair_operator().improve([optimal], inst)
        assert (out == optimal).all()

    def test_never_increases_hard_total(self, rng):
        inst = gen_instance(3, 5, seed=7)
        op = repair_operator()
        for _ in range(30):
            schedule = rng.integers(0, 4, size=(3, 5))
            before = evaluate(schedule, inst).hard_total
            (after,) = op.improve([schedule], inst)
            assert evaluate(after, inst).hard_total <= before

    def test_inputs_not_mutated(self, rng):
        inst = gen_instance(3, 5, seed=8)
        schedule = rng.integers(0, 4, size=(3, 5))
        original = schedule.copy()
        repair_operator().improve([schedule], inst)
        assert (schedule == original).all()


class TestNeuralOperatorClient:
    def test_echo_stub_round_trips(self, rng):
        inst = gen_instance(3, 4, seed=9)
        batch = [rng.integers(0, 4, size=(3, 4)) for _ in range(4)]
        with StubServer(argmax_echo_responder) as server:
            op = neural_operator(server.endpoint, timeout=5.0)
            out = op.improve(batch, inst)
            op.close()
        assert len(out) == 4
        for x, y in zip(batch, out):
            assert (x == y).all()

    def test_constant_stub(self, rng):
        inst = gen_instance(2, 3, seed=10)
        batch = [rng.integers(0, 4, size=(2, 3)) for _ in range(3)]
        with StubServer(constant_responder(0)) as server:
            op = neural_operator(server.endpoint, timeout=5.0)
            out = op.improve(batch, inst)
            op.close()
        for y in out:
            assert (y == 0).all()

    def test_single_request_per_batch(self, rng):
        inst = gen_instance(2, 3, seed=11)
        batch = [rng.integers(0, 4, size=(2, 3)) for _ in range(7)]
        with StubServer(argmax_echo_responder) as server:
            op = neural_operator(server.endpoint, timeout=5.0)
            op.improve(batch, inst)
            op.improve(batch, inst)
            op.close()
            assert len(server.requests) == 2
            assert all(len(r["graphs"]) == 7 for r in server.requests)
            assert server.requests[0]["meta"]["feature_dim"] == FEATURE_DIM

    def test_server_error_raises_operator_failure(self, rng):
        inst = gen_instance(2, 3, seed=12)
        batch = [rng.integers(0, 4, size=(2, 3))]
        with StubServer(error_responder("bad graph")) as server:
            op = neural_operator(server.endpoint, timeout=5.0)
            with pytest.raises(OperatorFailureError, match="bad graph"):
                op.improve(batch, inst)
            op.close()

    def test_connection_refused(self, rng):
        inst = gen_instance(2, 3, seed=13)
        op = neural_operator("127.0.0.1:1", timeout=0.5)
        with pytest.raises(OperatorFailureError):
            op.improve([np.zeros((2, 3), dtype=int)], inst)

    def test_rejected_handshake(self, rng):
        inst = gen_instance(2, 3, seed=14)
        with StubServer(argmax_echo_responder, handshake=False) as server:
            op = neural_operator(server.endpoint, timeout=5.0)
            with pytest.raises(OperatorFailureError):
                op.improve([np.zeros((2, 3), dtype=int)], inst)


class TestOperatorLaw:
    def test_length_and_order_preserved(self, rng):
        inst = gen_instance(3, 4, seed=15)
        batch = [rng.integers(0, 4, size=(3, 4)) for _ in range(6)]
        operators = [identity_operator(), repair_operator()]
        for op in operators:
            out = op.improve(batch, inst)
            assert len(out) == len(batch)
            assert all(y.shape == (3, 4) for y in out)
        with StubServer(argmax_echo_responder) as server:
            op = neural_operator(server.endpoint, timeout=5.0)
            out = op.improve(batch, inst)
            op.close()
        assert len(out) == len(batch)
        for x, y in zip(batch, out):
            assert (x == y).all()  # echo stub keeps order observable
