"""Minimum-cost one-to-one matching with a deterministic tie-break.

The optimal assignment itself comes from scipy's linear_sum_assignment.
Optimal dual potentials are then recovered by Bellman-Ford over the
difference-constraint system induced by the matched edges, and the
lexicographically smallest optimal permutation is extracted greedily on the
tight-edge subgraph (every perfect matching of tight edges attains the
optimal cost, and every optimal matching is tight).
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError


def find_matchings(distances) -> np.ndarray:
    """Permutation sigma minimizing sum_i distances[i, sigma[i]].

    Ties between minimum-cost assignments are broken toward the
    lexicographically smallest permutation (sigma[0] minimal, then
    sigma[1], ...).
    """
    cost = np.asarray(distances, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise InvalidInputError("distance matrix must be square")
    if cost.size == 0:
        raise InvalidInputError("distance matrix must be nonempty")
    if (cost < 0).any():
        raise InvalidInputError("distances must be nonnegative")
    n = cost.shape[0]
    if n == 1:
        return np.array([0], dtype=np.int64)

    _, sigma = linear_sum_assignment(cost)
    u, v = _optimal_duals(cost, sigma)
    tol = 1e-9 * max(1.0, float(np.abs(cost).max()))
    tight = (cost - u[:, None] - v[None, :]) <= tol
    return _lex_smallest_tight(tight, sigma)


def _optimal_duals(cost: np.ndarray, sigma: np.ndarray):
    """Feasible duals (u, v) tight on the given optimal assignment.

    Dual feasibility u_i + v_j <= c_ij with equality on matched edges
    reduces to v_j - v_m <= c[r, j] - c[r, m] for each matched pair
    (r, m).  The system has no negative cycle because sigma is optimal, so
    Bellman-Ford from an all-zero start converges within n passes.
    """
    n = cost.shape[0]
    row_of = np.empty(n, dtype=np.int64)
    row_of[sigma] = np.arange(n)
    # W[m, j] = c[row_of[m], j] - c[row_of[m], m]
    W = cost[row_of] - cost[row_of, np.arange(n)][:, None]
    v = np.zeros(n)
    for _ in range(n):
        cand = (v[:, None] + W).min(axis=0)
        new_v = np.minimum(v, cand)
        if np.array_equal(new_v, v):
            break
        v = new_v
    u = cost[np.arange(n), sigma] - v[sigma]
    return u, v


def _lex_smallest_tight(tight: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Lexicographically smallest perfect matching on the tight subgraph."""
    n = tight.shape[0]
    match = sigma.astype(np.int64).copy()  # row -> col
    owner = np.empty(n, dtype=np.int64)  # col -> row
    owner[match] = np.arange(n)
    adj = [np.flatnonzero(tight[i]) for i in range(n)]
    fixed = np.zeros(n, dtype=bool)  # columns claimed by earlier rows

    def rematch(row: int, banned: int, free_col: int, visited: np.ndarray) -> bool:
        for j in adj[row]:
            if j == banned or fixed[j] or visited[j]:
                continue
            visited[j] = True
            if j == free_col or rematch(owner[j], banned, free_col, visited):
                owner[j] = row
                match[row] = j
                return True
        return False

    for i in range(n):
        for j in adj[i]:
            if fixed[j]:
                continue
            if j == match[i]:
                break
            displaced = owner[j]
            freed = match[i]
            visited = np.zeros(n, dtype=bool)
            visited[j] = True
            if rematch(displaced, j, freed, visited):
                match[i] = j
                owner[j] = i
                break
        fixed[match[i]] = True
    return match
