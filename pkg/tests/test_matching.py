"""Assignment matching: optimality and the lexicographic tie-break."""

from itertools import permutations

import numpy as np
import pytest

from rosterga.errors import InvalidInputError
from rosterga.matching import find_matchings


def brute_force(cost):
    """(min cost, lexicographically smallest argmin permutation)."""
    n = len(cost)
    best_cost = None
    best_perm = None
    for perm in permutations(range(n)):
        c = sum(cost[i][perm[i]] for i in range(n))
        if best_cost is None or c < best_cost - 1e-12:
            best_cost, best_perm = c, perm
    return best_cost, best_perm


def test_diagonal_zeros():
    sigma = find_matchings([[0, 5], [5, 0]])
    assert sigma.tolist() == [0, 1]


def test_cross_assignment():
    sigma = find_matchings([[4, 1], [2, 3]])
    assert sigma.tolist() == [1, 0]


def test_single_element():
    assert find_matchings([[7]]).tolist() == [0]


def test_random_costs_match_brute_force(rng):
    for _ in range(100):
        n = int(rng.integers(2, 7))
        cost = rng.integers(0, 20, size=(n, n))
        sigma = find_matchings(cost)
        got = cost[np.arange(n), sigma].sum()
        want, _ = brute_force(cost.tolist())
        assert got == want


def test_lexicographic_tie_break(rng):
    # small integer range forces many optimal ties
    for _ in range(200):
        n = int(rng.integers(2, 6))
        cost = rng.integers(0, 3, size=(n, n))
        sigma = find_matchings(cost)
        _, want = brute_force(cost.tolist())
        assert sigma.tolist() == list(want)


def test_all_equal_costs_yield_identity():
    sigma = find_matchings(np.full((4, 4), 7))
    assert sigma.tolist() == [0, 1, 2, 3]


def test_cost_never_beaten_by_random_permutations(rng):
    for _ in range(20):
        n = int(rng.integers(2, 9))
        cost = rng.integers(0, 50, size=(n, n))
        sigma = find_matchings(cost)
        got = cost[np.arange(n), sigma].sum()
        assert got <= cost[np.arange(n), np.arange(n)].sum()
        for _ in range(100):
            perm = rng.permutation(n)
            assert got <= cost[np.arange(n), perm].sum()


def test_float_costs(rng):
    for _ in range(50):
        n = int(rng.integers(2, 6))
        cost = rng.random((n, n)) * 10
        sigma = find_matchings(cost)
        got = cost[np.arange(n), sigma].sum()
        want, _ = brute_force(cost.tolist())
        assert got == pytest.approx(want, abs=1e-9)


def test_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        find_matchings([[1, 2, 3], [4, 5, 6]])
    with pytest.raises(InvalidInputError):
        find_matchings([[-1]])
