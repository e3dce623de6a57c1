"""Weighted feedback arc set: cost, boundedness and a solver for bounded instances.

An instance is an ``m x m`` weight matrix ``w``; ordering ``u`` before ``v``
pays ``w[v, u]``. Weights may be negative at this level.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolationError, InvalidInputError
from .privacy import as_rng
from .rankings import Ranking

BOUNDED_TOLERANCE = 1e-12
EXACT_THRESHOLD = 9
KWIKSORT_RESTARTS = 32


def _as_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] == 0:
        raise InvalidInputError("weights must be a non-empty square matrix")
    if not np.all(np.isfinite(w)):
        raise InvalidInputError("weights must be finite")
    return w


def _positions(pi, m: int) -> np.ndarray:
    pos = pi.as_array() if isinstance(pi, Ranking) else np.asarray(pi, dtype=np.int64)
    if pos.shape != (m,):
        raise InvalidInputError(f"ranking has {pos.shape[0]} candidates, weights have {m}")
    return pos


def wfas_cost(w, pi) -> float:
    """``sum_{pi(u) < pi(v)} w[v, u]``."""
    w = _as_weights(w)
    pos = _positions(pi, w.shape[0])
    before = pos[:, None] < pos[None, :]
    return float(w.T[before].sum())


def order_cost(w: np.ndarray, order) -> float:
    """Cost of candidates listed first-to-last (0-indexed)."""
    order = np.asarray(order)
    sub = w[np.ix_(order, order)]
    # entries below the diagonal of the reordered matrix are w[later, earlier]
    return float(np.tril(sub, -1).sum())


def is_bounded(w, tol: float = BOUNDED_TOLERANCE) -> bool:
    """Non-negative off-diagonal weights with every pair sum in [1/2, 2]."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1] or not np.all(np.isfinite(w)):
        return False
    off = ~np.eye(w.shape[0], dtype=bool)
    if np.any(w[off] < -tol):
        return False
    sums = (w + w.T)[off]
    return bool(np.all((sums >= 0.5 - tol) & (sums <= 2.0 + tol)))


def _order_to_ranking(order) -> Ranking:
    return Ranking.from_order([int(c) + 1 for c in order])


def exact_order(w) -> list[int]:
    """Optimal order by dynamic programming over subsets, O(2^m m^2).

    ``best[S]`` is the cheapest cost of placing the set ``S`` first; appending
    ``c`` after ``S`` pays ``sum_{s in S} w[c, s]``.
    """
    w = _as_weights(w)
    m = w.shape[0]
    n_masks = 1 << m
    bits = ((np.arange(n_masks)[:, None] >> np.arange(m)[None, :]) & 1).astype(float)
    append_cost = bits @ w.T  # [S, c] = sum_{s in S} w[c, s]
    best = np.full(n_masks, np.inf)
    parent = np.full(n_masks, -1, dtype=np.int64)
    best[0] = 0.0
    for mask in range(n_masks):
        base = best[mask]
        row = append_cost[mask]
        for c in range(m):
            bit = 1 << c
            if mask & bit:
                continue
            cand = base + row[c]
            nxt = mask | bit
            if cand < best[nxt]:
                best[nxt] = cand
                parent[nxt] = c
    order = []
    mask = n_masks - 1
    while mask:
        c = int(parent[mask])
        order.append(c)
        mask ^= 1 << c
    return order[::-1]


def kwiksort_order(w, rng) -> list[int]:
    """Pivot ordering: ``v`` goes before the pivot iff that is strictly cheaper."""
    w = _as_weights(w)
    rng = as_rng(rng)
    out: list[int] = []
    stack: list[list[int]] = [list(range(w.shape[0]))]
    # stack holds pending groups; the last pushed is emitted first
    while stack:
        group = stack.pop()
        if len(group) <= 1:
            out.extend(group)
            continue
        pivot = group[int(rng.integers(len(group)))]
        rest = np.array([v for v in group if v != pivot])
        left = rest[w[pivot, rest] < w[rest, pivot]]
        right = rest[w[pivot, rest] >= w[rest, pivot]]
        stack.append(right.tolist())
        stack.append([pivot])
        stack.append(left.tolist())
    return out


def score_order(w) -> list[int]:
    """Candidates by decreasing row sum (how strongly each precedes the others)."""
    w = _as_weights(w)
    return np.argsort(-w.sum(axis=1), kind="stable").tolist()


def adjacent_swap_search(w, order) -> list[int]:
    """Swap adjacent candidates while that strictly lowers the cost."""
    w = _as_weights(w)
    order = list(order)
    improved = True
    while improved:
        improved = False
        for k in range(len(order) - 1):
            a, b = order[k], order[k + 1]
            # a before b pays w[b, a]; swapped pays w[a, b]
            if w[a, b] < w[b, a]:
                order[k], order[k + 1] = b, a
                improved = True
    return order


def heuristic_order(w, rng=0, restarts: int = KWIKSORT_RESTARTS) -> list[int]:
    w = _as_weights(w)
    rng = as_rng(rng)
    candidates = [score_order(w)]
    candidates += [kwiksort_order(w, rng) for _ in range(restarts)]
    candidates = [adjacent_swap_search(w, c) for c in candidates]
    costs = [order_cost(w, c) for c in candidates]
    return candidates[int(np.argmin(costs))]


def solve_bounded(w, xi: float | None = None, *, exact_threshold: int = EXACT_THRESHOLD, rng=0,
                  restarts: int = KWIKSORT_RESTARTS) -> Ranking:
    """Low-cost ranking for a bounded instance.

    Exact for ``m <= exact_threshold``. Above that, the best of row-sum ordering
    and seeded pivot orderings, each polished by adjacent swaps; this branch is a
    heuristic and ``xi`` is not used by it.
    """
    w = _as_weights(w)
    if not is_bounded(w):
        raise ContractViolationError("solve_bounded requires a bounded instance")
    if w.shape[0] <= exact_threshold:
        return _order_to_ranking(exact_order(w))
    return _order_to_ranking(heuristic_order(w, rng, restarts))
