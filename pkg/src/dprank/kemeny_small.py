"""Private pairwise-matrix estimation for the small-``n`` regime.

Positions are cut into ``B`` contiguous buckets. The pairwise matrix splits as
``w = s + t`` where ``s`` counts comparisons inside a bucket and ``t`` counts
pairs whose buckets are strictly ordered. ``s`` has low sensitivity and is
noised directly; ``t`` is a sum of two-way marginals of the one-hot bucket
encoding and comes from a pluggable marginal backend. The sum is projected back
onto valid pairwise matrices with :func:`clip_matrix`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidParameterError
from .privacy import (BudgetLedger, PrivacyBudget, as_rng, charge, clip_matrix, noise_is_disabled, sample_gaussian,
                      sample_laplace)
from .rankings import Ranking, RankingDataset
from .wfas import EXACT_THRESHOLD, solve_bounded

_CHUNK = 1 << 14


@dataclass(frozen=True)
class BucketScheme:
    """``B`` contiguous position buckets; sizes differ by at most one (larger first)."""

    m: int
    n_buckets: int

    def __post_init__(self) -> None:
        if not 1 <= self.n_buckets <= self.m:
            raise InvalidParameterError(f"bucket count must lie in [1, {self.m}], got {self.n_buckets}")

    @property
    def bucket_of_position(self) -> np.ndarray:
        """0-based bucket of positions ``1..m`` (index ``p - 1``)."""
        out = np.empty(self.m, dtype=np.int64)
        for b, chunk in enumerate(np.array_split(np.arange(self.m), self.n_buckets)):
            out[chunk] = b
        return out

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.bucket_of_position, minlength=self.n_buckets)

    def buckets(self, positions: np.ndarray) -> np.ndarray:
        return self.bucket_of_position[np.asarray(positions) - 1]


def default_bucket_count(m: int, n: int, budget: PrivacyBudget) -> int:
    """Bucket count balancing the two error terms, clamped to ``[1, m]``."""
    b = budget.as_mechanism_budget()
    if b.kind == "zcdp":
        log_b = (3 * math.log(m) - 2 * math.log(n) - math.log(b.rho)) / 11
    elif b.kind == "pure":
        log_b = (3 * math.log(m) - math.log(n) - math.log(b.epsilon)) / 7
    else:
        raise InvalidParameterError(f"no bucket rule for {budget.kind!r} budgets")
    value = math.exp(log_b)
    # exact powers such as 128**(2/7) = 4 should not round up past the integer
    nearest = round(value)
    count = nearest if abs(value - nearest) < 1e-9 else math.ceil(value)
    return int(min(max(count, 1), m))


def split_s_t(data: RankingDataset, scheme: BucketScheme) -> tuple[np.ndarray, np.ndarray]:
    """Exact same-bucket part ``s`` and cross-bucket part ``t`` of the pairwise matrix."""
    m = data.m
    s = np.zeros((m, m), dtype=np.int64)
    t = np.zeros((m, m), dtype=np.int64)
    for start in range(0, data.n, _CHUNK):
        pos = data.positions[start:start + _CHUNK]
        bkt = scheme.buckets(pos)
        same = bkt[:, :, None] == bkt[:, None, :]
        s += (same & (pos[:, :, None] < pos[:, None, :])).sum(axis=0)
        t += (bkt[:, :, None] < bkt[:, None, :]).sum(axis=0)
    return s / data.n, t / data.n


def encode(data: RankingDataset, scheme: BucketScheme) -> np.ndarray:
    """One-hot ``(n, m * B)`` encoding; column ``u * B + b`` is ``1[bucket(pi_i(u)) = b]``."""
    n, m, nb = data.n, data.m, scheme.n_buckets
    x = np.zeros((n, m * nb), dtype=np.int8)
    cols = np.arange(m)[None, :] * nb + scheme.buckets(data.positions)
    x[np.arange(n)[:, None], cols] = 1
    return x


def cross_bucket_queries(m: int, n_buckets: int) -> np.ndarray:
    """Rows ``(u, b_u, v, b_v)`` (0-based) with ``u != v`` and ``b_u < b_v``."""
    bu, bv = np.triu_indices(n_buckets, k=1)
    u, v = np.nonzero(~np.eye(m, dtype=bool))
    uu = np.repeat(u, len(bu))
    vv = np.repeat(v, len(bu))
    return np.column_stack([uu, np.tile(bu, len(u)), vv, np.tile(bv, len(u))]).astype(np.int64)


def marginal_answers(encoding: np.ndarray, queries: np.ndarray, n_buckets: int) -> np.ndarray:
    """Exact ``q_S = (1/n) sum_i x_i(u, b_u) x_i(v, b_v)`` for each query row."""
    x = encoding.astype(np.float64)
    joint = x.T @ x / x.shape[0]
    a = queries[:, 0] * n_buckets + queries[:, 1]
    b = queries[:, 2] * n_buckets + queries[:, 3]
    return joint[a, b]


def marginal_sensitivity(m: int, n: int, p: int) -> float:
    """Sensitivity of the cross-bucket answer vector under replacing one user.

    A user's vector has one 1 per candidate, so for every unordered candidate
    pair exactly one orientation can have ``b_u < b_v``: at most ``C(m, 2)``
    answers are 1. A replacement changes at most ``2 C(m, 2)`` of them by ``1/n``.
    """
    changed = m * (m - 1)
    return changed / n if p == 1 else math.sqrt(changed) / n


def same_bucket_sensitivity(scheme: BucketScheme, n: int, p: int) -> float:
    """Sensitivity of ``s``: each user has ``sum_b C(size_b, 2)`` same-bucket ordered pairs."""
    pairs = int(sum(math.comb(int(k), 2) for k in scheme.sizes))
    return 2.0 * pairs / n if p == 1 else math.sqrt(2.0 * pairs) / n


def _noise(values: np.ndarray, sens_l1: float, sens_l2: float, budget: PrivacyBudget, rng) -> np.ndarray:
    if sens_l1 == 0:
        return values.astype(float)
    if budget.kind == "pure":
        return values + sample_laplace(sens_l1 / budget.epsilon, rng, size=values.shape)
    return values + sample_gaussian(sens_l2 / math.sqrt(2.0 * budget.rho), rng, size=values.shape)


def noise_scale(sens_l1: float, sens_l2: float, budget: PrivacyBudget) -> float:
    b = budget.as_mechanism_budget()
    return sens_l1 / b.epsilon if b.kind == "pure" else sens_l2 / math.sqrt(2.0 * b.rho)


def two_marginal_baseline(encoding: np.ndarray, queries: np.ndarray, n_buckets: int, budget: PrivacyBudget,
                          rng: np.random.Generator, query_weights: np.ndarray | None = None) -> np.ndarray:
    """Unbiased private answers: calibrated noise on every exact answer.

    ``query_weights`` is part of the marginal contract so importance-weighted
    backends can be slotted in; direct noise addition calibrates to the
    sensitivity of the whole vector and ignores it.
    """
    n = encoding.shape[0]
    m = encoding.shape[1] // n_buckets
    exact = marginal_answers(encoding, queries, n_buckets)
    return _noise(exact, marginal_sensitivity(m, n, 1), marginal_sensitivity(m, n, 2),
                  budget.as_mechanism_budget(), rng)


def cross_bucket_from_marginals(answers: np.ndarray, queries: np.ndarray, m: int) -> np.ndarray:
    """``t[u, v] = sum_{b_u < b_v} q_{(u, b_u), (v, b_v)}``."""
    t = np.zeros((m, m))
    np.add.at(t, (queries[:, 0], queries[:, 2]), answers)
    return t


# (data, scheme, budget, rng) -> noisy cross-bucket matrix t~
MarginalBackend = Callable[[RankingDataset, BucketScheme, PrivacyBudget, np.random.Generator], np.ndarray]


def explicit_marginal_backend(data: RankingDataset, scheme: BucketScheme, budget: PrivacyBudget,
                              rng: np.random.Generator) -> np.ndarray:
    """Answer every cross-bucket query with :func:`two_marginal_baseline`, then sum.

    Memory grows as ``m^2 B^2``; meant for small instances and cross-checks.
    """
    nb = scheme.n_buckets
    queries = cross_bucket_queries(data.m, nb)
    answers = two_marginal_baseline(encode(data, scheme), queries, nb, budget, rng)
    return cross_bucket_from_marginals(answers, queries, data.m)


def summed_marginal_backend(data: RankingDataset, scheme: BucketScheme, budget: PrivacyBudget,
                            rng: np.random.Generator) -> np.ndarray:
    """Same output distribution as :func:`explicit_marginal_backend` in ``O(m^2)`` memory.

    Each ``t~[u, v]`` is the exact ``t[u, v]`` plus a sum of ``C(B, 2)`` iid
    noise draws. A sum of ``k`` Gaussians of scale ``sigma`` is Gaussian of
    scale ``sigma sqrt(k)``; a sum of ``k`` Laplace(b) draws equals the
    difference of two independent Gamma(k, b) draws.
    """
    m, n, nb = data.m, data.n, scheme.n_buckets
    budget = budget.as_mechanism_budget()
    _, t = split_s_t(data, scheme)
    off = ~np.eye(m, dtype=bool)
    out = np.zeros((m, m))
    out[off] = t[off]
    if noise_is_disabled():
        return out
    count = math.comb(nb, 2)
    size = int(off.sum())
    if budget.kind == "pure":
        scale = marginal_sensitivity(m, n, 1) / budget.epsilon
        out[off] += rng.gamma(count, scale, size) - rng.gamma(count, scale, size)
    else:
        sigma = marginal_sensitivity(m, n, 2) / math.sqrt(2.0 * budget.rho)
        out[off] += sample_gaussian(sigma * math.sqrt(count), rng, size=size)
    return out


def estimate_w_small_n(data: RankingDataset, budget: PrivacyBudget, n_buckets: int | None = None, *,
                       ledger: BudgetLedger | None = None, rng=None, same_bucket_share: float = 0.5,
                       backend: MarginalBackend = summed_marginal_backend, report: dict | None = None) -> np.ndarray:
    """Private clipped estimate of the pairwise matrix."""
    return clip_matrix(noisy_decomposition(data, budget, n_buckets, ledger=ledger, rng=rng,
                                           same_bucket_share=same_bucket_share, backend=backend, report=report))


def noisy_decomposition(data: RankingDataset, budget: PrivacyBudget, n_buckets: int | None = None, *,
                        ledger: BudgetLedger | None = None, rng=None, same_bucket_share: float = 0.5,
                        backend: MarginalBackend = summed_marginal_backend, report: dict | None = None) -> np.ndarray:
    """Unclipped private estimate ``s~ + t~``."""
    budget = budget.as_mechanism_budget()
    if budget.kind not in ("pure", "zcdp"):
        raise InvalidParameterError(f"small-n estimation supports pure and zcdp budgets, not {budget.kind!r}")
    if not 0 < same_bucket_share < 1:
        raise InvalidParameterError("same_bucket_share must lie in (0, 1)")
    m, n = data.m, data.n
    nb = default_bucket_count(m, n, budget) if n_buckets is None else int(n_buckets)
    scheme = BucketScheme(m, nb)
    s_budget = budget.scaled(same_bucket_share)
    t_budget = budget.scaled(1.0 - same_bucket_share)
    charge(ledger, s_budget, "small_n.same_bucket")
    charge(ledger, t_budget, "small_n.marginals")
    gen = as_rng(rng)

    s, _ = split_s_t(data, scheme)
    off = ~np.eye(m, dtype=bool)
    s_noisy = np.zeros((m, m))
    s_noisy[off] = _noise(s[off], same_bucket_sensitivity(scheme, n, 1), same_bucket_sensitivity(scheme, n, 2),
                          s_budget, gen)

    t_noisy = np.zeros((m, m))
    if nb > 1:
        t_noisy = backend(data, scheme, t_budget, gen)

    if report is not None:
        report.update({
            "buckets": nb,
            "same_bucket_noise": noise_scale(same_bucket_sensitivity(scheme, n, 1),
                                             same_bucket_sensitivity(scheme, n, 2), s_budget),
            "marginal_noise": noise_scale(marginal_sensitivity(m, n, 1), marginal_sensitivity(m, n, 2), t_budget),
        })
    return s_noisy + t_noisy


def kemeny_small_n(data: RankingDataset, budget: PrivacyBudget, n_buckets: int | None = None, *,
                   ledger: BudgetLedger | None = None, rng=None, exact_threshold: int = EXACT_THRESHOLD,
                   report: dict | None = None, **kwargs) -> Ranking:
    """Estimate the pairwise matrix privately, then solve the (bounded) WFAS instance."""
    gen = as_rng(rng)
    w_est = estimate_w_small_n(data, budget, n_buckets, ledger=ledger, rng=gen, report=report, **kwargs)
    return solve_bounded(w_est, exact_threshold=exact_threshold, rng=gen)
