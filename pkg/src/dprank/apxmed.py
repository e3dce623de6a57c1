"""Private approximate-median profiles via a modified binary tree mechanism.

For data ``x_1..x_n`` in ``[m]`` we release, for every ``j`` in ``[m]``,

    gamma_j = (1/n) * sum_i |x_i - j|.

The domain is padded to ``m_padded = 2**d`` and covered by dyadic intervals
``[(p-1) 2^l + 1, p 2^l]`` at levels ``l = 0..d``. Each node ``t`` aggregates

    v_t = (1/n) sum_{x_i in I(t)} (x_i - r(t)),    u_t = (1/n) sum_{x_i in I(t)} 2^l,

where ``r(t)`` is the left end of ``I(t)``. Every contribution at level ``l`` is
pre-multiplied by ``kappa**(d-l)`` before the single private aggregation and
divided back afterwards. For a query ``j`` the siblings of the non-root nodes
containing ``j`` tile ``[m_padded] \\ {j}``; a sibling to the right contributes
``v + (r - j) u / 2^l`` and one to the left contributes its negation.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import IO

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .privacy import BudgetLedger, PrivacyBudget, as_rng, charge
from .vecagg import (
    LocalMechanism,
    LocalProtocol,
    gaussian_mean_sigma,
    laplace_mean_scale,
    local_laplace_scale,
    release_mean_gaussian,
    release_mean_laplace,
)

DEFAULT_KAPPA = 1.5

# upper bound on floats materialized per chunk of local-model users
_LOCAL_CHUNK_FLOATS = 1 << 22


@dataclass(frozen=True, eq=False)
class DyadicTree:
    """Complete binary tree of dyadic intervals over ``[m_padded]``.

    Nodes are stored level by level (leaves first); node ``k`` has level
    ``level[k]``, 1-based index ``position[k]`` within its level and interval
    ``[lo[k], hi[k]]``. ``sibling[k]`` is -1 for the root.
    """

    m: int
    m_padded: int
    depth: int
    offsets: tuple[int, ...]
    level: np.ndarray
    position: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    is_left: np.ndarray
    sibling: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.level)

    @property
    def root(self) -> int:
        return self.n_nodes - 1

    def index(self, level: int, position: int) -> int:
        return self.offsets[level] + position - 1

    def node_containing(self, x: int, level: int) -> int:
        return self.offsets[level] + ((x - 1) >> level)

    def interval(self, node: int) -> tuple[int, int]:
        return int(self.lo[node]), int(self.hi[node])

    def query_nodes(self, j: int) -> list[int]:
        """Non-root nodes whose interval contains ``j`` (one per level below the root)."""
        if not 1 <= j <= self.m_padded:
            raise InvalidInputError(f"query {j} outside [1, {self.m_padded}]")
        return [self.node_containing(j, lvl) for lvl in range(self.depth)]


def _next_pow2(m: int) -> int:
    return 1 << max(0, math.ceil(math.log2(m))) if m > 1 else 1


@functools.lru_cache(maxsize=64)
def build_tree(m: int) -> DyadicTree:
    if m < 1:
        raise InvalidInputError(f"m must be >= 1, got {m}")
    m_pad = _next_pow2(m)
    depth = m_pad.bit_length() - 1
    offsets, level, position = [], [], []
    total = 0
    for lvl in range(depth + 1):
        count = m_pad >> lvl
        offsets.append(total)
        level.extend([lvl] * count)
        position.extend(range(1, count + 1))
        total += count
    level_a = np.asarray(level, dtype=np.int64)
    pos_a = np.asarray(position, dtype=np.int64)
    lo = (pos_a - 1) * (1 << level_a) + 1
    hi = pos_a * (1 << level_a)
    is_left = (pos_a % 2) == 1
    sibling = np.full(total, -1, dtype=np.int64)
    non_root = level_a < depth
    idx = np.flatnonzero(non_root)
    sibling[idx] = np.where(is_left[idx], idx + 1, idx - 1)
    for arr in (level_a, pos_a, lo, hi, is_left, sibling):
        arr.flags.writeable = False
    return DyadicTree(m, m_pad, depth, tuple(offsets), level_a, pos_a, lo, hi, is_left, sibling)


def _check_kappa(kappa: float) -> None:
    if not 1.0 < kappa < 2.0:
        raise InvalidParameterError(f"kappa must lie in (1, 2), got {kappa}")


def weighted_contribution(tree: DyadicTree, x: int, kappa: float = DEFAULT_KAPPA) -> tuple[np.ndarray, np.ndarray]:
    """The ``(v, u)`` node vectors a single value ``x`` contributes."""
    if not 1 <= x <= tree.m_padded:
        raise InvalidInputError(f"value {x} outside [1, {tree.m_padded}]")
    v = np.zeros(tree.n_nodes)
    u = np.zeros(tree.n_nodes)
    for lvl in range(tree.depth + 1):
        t = tree.node_containing(x, lvl)
        w = kappa ** (tree.depth - lvl)
        v[t] = w * (x - tree.lo[t])
        u[t] = w * (1 << lvl)
    return v, u


@functools.lru_cache(maxsize=64)
def contribution_table(m: int, kappa: float = DEFAULT_KAPPA) -> np.ndarray:
    """Row ``x-1`` is the concatenated ``[v; u]`` contribution of value ``x``."""
    _check_kappa(kappa)
    tree = build_tree(m)
    table = np.zeros((tree.m_padded, 2 * tree.n_nodes))
    for x in range(1, tree.m_padded + 1):
        v, u = weighted_contribution(tree, x, kappa)
        table[x - 1, : tree.n_nodes] = v
        table[x - 1, tree.n_nodes:] = u
    table.flags.writeable = False
    return table


def estimate_terms(tree: DyadicTree, v_agg: np.ndarray, u_agg: np.ndarray, j: int) -> list[tuple[int, int, float]]:
    """Per-node terms ``(t, sibling, gamma_{j,t})`` from *unweighted* aggregates."""
    terms = []
    for t in tree.query_nodes(j):
        s = tree.sibling[t]
        sign = 1.0 if tree.is_left[t] else -1.0
        scale = (tree.lo[s] - j) / float(1 << int(tree.level[s]))
        terms.append((t, int(s), sign * (v_agg[s] + scale * u_agg[s])))
    return terms


@functools.lru_cache(maxsize=64)
def reconstruction_matrix(m: int, kappa: float = DEFAULT_KAPPA) -> np.ndarray:
    """Linear map from the weighted aggregate ``[v; u]`` to ``(gamma_1..gamma_m)``.

    Folds the reweighting by ``kappa**(l-d)`` and the signed sibling sums.
    """
    _check_kappa(kappa)
    tree = build_tree(m)
    n_nodes = tree.n_nodes
    rec = np.zeros((m, 2 * n_nodes))
    for j in range(1, m + 1):
        for t in tree.query_nodes(j):
            s = int(tree.sibling[t])
            lvl = int(tree.level[s])
            sign = 1.0 if tree.is_left[t] else -1.0
            unweight = kappa ** (lvl - tree.depth)
            rec[j - 1, s] += sign * unweight
            rec[j - 1, n_nodes + s] += sign * unweight * (tree.lo[s] - j) / float(1 << lvl)
    rec.flags.writeable = False
    return rec


def contribution_norm_bound(m: int, kappa: float = DEFAULT_KAPPA, p: int = 1) -> float:
    """Exact ``max_{x in [m]}`` of the ``p``-norm of one value's contribution."""
    table = contribution_table(m, kappa)
    return float(np.max(np.linalg.norm(table[:m], ord=p, axis=1)))


def geometric_norm_constant(kappa: float, depth: int, p: int) -> float:
    """``(sum_{l=0}^{d} (kappa/2)^{p(d-l)})^{1/p}``; times ``m_padded`` it bounds ||v||_p and ||u||_p."""
    return sum((kappa / 2.0) ** (p * (depth - lvl)) for lvl in range(depth + 1)) ** (1.0 / p)


def declared_bound(m: int, instances: int, kappa: float, p: int) -> float:
    """Norm bound for ``instances`` concatenated contributions.

    l1 norms add across instances, l2 norms add in quadrature.
    """
    per_value = contribution_norm_bound(m, kappa, p)
    return per_value * (instances if p == 1 else math.sqrt(instances))


def contribution_mean(rows: np.ndarray, m: int, kappa: float = DEFAULT_KAPPA) -> np.ndarray:
    """Un-noised mean of the concatenated contributions, computed from value histograms."""
    rows = np.asarray(rows, dtype=np.int64)
    n, k = rows.shape
    table = contribution_table(m, kappa)
    width = table.shape[1]
    mean = np.empty(k * width)
    for q in range(k):
        hist = np.bincount(rows[:, q] - 1, minlength=table.shape[0]).astype(float)
        mean[q * width:(q + 1) * width] = (hist / n) @ table
    return mean


def _norm_order(budget: PrivacyBudget) -> int:
    return 1 if budget.kind == "pure" else 2


def _release(mean: np.ndarray, n: int, bound: float, budget: PrivacyBudget, rng: np.random.Generator) -> np.ndarray:
    if budget.kind == "pure":
        return release_mean_laplace(mean, n, bound, budget.epsilon, rng)
    if budget.kind == "zcdp":
        return release_mean_gaussian(mean, n, bound, budget.rho, rng)
    raise InvalidParameterError(f"central release does not support {budget.kind!r} budgets")


def _check_values(x: np.ndarray, m: int) -> None:
    if x.size == 0:
        raise InvalidInputError("need at least one data point")
    if x.min() < 1 or x.max() > m:
        raise InvalidInputError(f"data values must lie in [1, {m}]")


def _local_aggregate(rows: np.ndarray, table: np.ndarray, bound: float, epsilon: float, rng, seed,
                     mechanism: LocalMechanism, message_log: IO[str] | None) -> np.ndarray:
    # rows: (n, k) values; each user's vector is the concatenation of k table rows
    n, k = rows.shape
    proto = LocalProtocol(bound, epsilon, rng=rng, seed=seed, mechanism=mechanism, message_log=message_log)
    chunk = max(1, _LOCAL_CHUNK_FLOATS // (k * table.shape[1]))
    for start in range(0, n, chunk):
        block = rows[start:start + chunk]
        proto.submit(table[block - 1].reshape(block.shape[0], -1))
    return proto.estimate()


def apx_median(x, m: int, budget: PrivacyBudget, *, ledger: BudgetLedger | None = None, rng=None,
               kappa: float = DEFAULT_KAPPA, local_mechanism: LocalMechanism = "laplace",
               message_log: IO[str] | None = None) -> np.ndarray:
    """Private estimates of ``(1/n) sum_i |x_i - j|`` for ``j = 1..m``.

    The backend follows ``budget.kind``: Laplace for ``pure``, Gaussian for
    ``zcdp``/``approx`` and the local randomizer for ``ldp``. The whole budget
    is charged once, before any noise is drawn.
    """
    x = np.asarray(x, dtype=np.int64).reshape(-1, 1)
    return _apx_median_rows(x, m, budget, ledger, rng, kappa, local_mechanism, message_log, "apx_median")[0]


def parallel_apx_median(data, budget: PrivacyBudget, *, m: int | None = None, ledger: BudgetLedger | None = None,
                        rng=None, kappa: float = DEFAULT_KAPPA, local_mechanism: LocalMechanism = "laplace",
                        message_log: IO[str] | None = None) -> np.ndarray:
    """``m`` ApxMed instances released by one aggregation of the concatenated vectors.

    ``data`` is an ``(n, m)`` array (or a :class:`RankingDataset`); column ``q``
    holds the values of instance ``q``. Returns ``G`` with
    ``G[j-1, q-1] ~ (1/n) sum_i |data[i, q] - j|``.
    """
    rows = np.asarray(getattr(data, "positions", data), dtype=np.int64)
    if rows.ndim != 2:
        raise InvalidInputError("parallel_apx_median expects an (n, m) array")
    m = rows.shape[1] if m is None else m
    est = _apx_median_rows(rows, m, budget, ledger, rng, kappa, local_mechanism, message_log, "parallel_apx_median")
    return est.T


def _apx_median_rows(rows: np.ndarray, m: int, budget: PrivacyBudget, ledger, rng, kappa, local_mechanism,
                     message_log, label) -> np.ndarray:
    _check_kappa(kappa)
    _check_values(rows, m)
    budget = budget.as_mechanism_budget()
    n, k = rows.shape
    table = contribution_table(m, kappa)
    rec = reconstruction_matrix(m, kappa)
    bound = declared_bound(m, k, kappa, _norm_order(budget))

    charge(ledger, budget, label)
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = as_rng(rng)
    width = table.shape[1]
    if budget.kind == "ldp":
        agg = _local_aggregate(rows, table, bound, budget.epsilon, gen, seed, local_mechanism, message_log)
    else:
        agg = _release(contribution_mean(rows, m, kappa), n, bound, budget, gen)
    return agg.reshape(k, width) @ rec.T


def exact_profile(x, m: int) -> np.ndarray:
    """Non-private ``(1/n) sum_i |x_i - j|`` for ``j = 1..m`` (reference values)."""
    x = np.asarray(x, dtype=np.int64).ravel()
    return np.abs(x[:, None] - np.arange(1, m + 1)[None, :]).mean(axis=0)


def mechanism_noise_scale(m: int, n: int, budget: PrivacyBudget, *, instances: int = 1,
                          kappa: float = DEFAULT_KAPPA) -> float:
    """Per-coordinate noise parameter: Laplace scale, Gaussian sigma, or local Laplace scale."""
    budget = budget.as_mechanism_budget()
    bound = declared_bound(m, instances, kappa, _norm_order(budget))
    if budget.kind == "pure":
        return laplace_mean_scale(bound, n, budget.epsilon)
    if budget.kind == "zcdp":
        return gaussian_mean_sigma(bound, n, budget.rho)
    width = 2 * build_tree(m).n_nodes * instances
    return local_laplace_scale(bound, width, budget.epsilon)
