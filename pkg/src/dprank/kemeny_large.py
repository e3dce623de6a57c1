"""Private Kemeny aggregation for the large-``n`` regime.

Pairs are first classified with noisy weights as imbalanced (one side wins by a
wide margin) or balanced. Imbalanced pairs keep only the noisy margin on the
winner's side, balanced pairs keep a noisy complementary split. If the result
is a bounded WFAS instance it is solved; otherwise a uniformly random ranking
is returned.

For any ranking, the exact cost splits as ``cost_w = sum_{(u, v) in Z_I} w[v, u]
+ cost_wt`` with ``wt`` the un-noised transformed matrix, so both share their
minimizers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .privacy import BudgetLedger, PrivacyBudget, as_rng, charge, sample_gaussian, sample_laplace
from .rankings import Ranking, RankingDataset, pairwise_matrix
from .wfas import EXACT_THRESHOLD, is_bounded, solve_bounded

logger = logging.getLogger(__name__)

UPPER_CUT = 5.0 / 6.0
LOWER_CUT = 1.0 / 6.0
_SNAP_BITS = 40


@dataclass(frozen=True)
class PairClassification:
    """``imbalanced`` rows ``(u, v)`` name the dominant candidate first; ``balanced`` rows have ``u < v``."""

    m: int
    imbalanced: np.ndarray
    balanced: np.ndarray

    def covers_each_pair_once(self) -> bool:
        pairs = np.vstack([self.imbalanced, self.balanced]).reshape(-1, 2)
        keys = np.sort(pairs, axis=1)
        expected = np.column_stack(np.triu_indices(self.m, k=1))
        return len(keys) == len(expected) and np.array_equal(np.unique(keys, axis=0), expected)


@dataclass(frozen=True)
class NoiseParameters:
    """Per-entry noise of the two releases: Laplace scales or Gaussian sigmas."""

    kind: str
    classification: float
    addition: float


def large_n_threshold(m: int, budget: PrivacyBudget) -> float:
    """Smallest ``n`` for which the large-``n`` guarantee is stated."""
    b = budget.as_mechanism_budget()
    if b.kind == "zcdp":
        return 10000.0 * m * math.sqrt(max(math.log(m / b.rho), 0.0)) / math.sqrt(b.rho)
    if b.kind == "pure":
        return 400.0 * m * m * max(math.log(m / b.epsilon), 0.0) / b.epsilon
    raise InvalidParameterError(f"no large-n threshold for {budget.kind!r} budgets")


def noise_parameters(m: int, n: int, budget: PrivacyBudget, *, classification_share: float = 0.5,
                     sigma: float | None = None) -> NoiseParameters:
    """Noise for the two releases.

    Pure: l1 sensitivity ``m^2/n`` for each release, so the default split gives
    Laplace scale ``2 m^2 / (n eps)``. zCDP: classification has l2 sensitivity
    at most ``m/n``; the imbalanced margins ``w_uv - w_vu`` move by ``2/n`` per
    entry, giving l2 sensitivity ``sqrt(2) m / n`` for the addition release.
    ``sigma`` overrides both Gaussian sigmas (for experiments only).
    """
    b = budget.as_mechanism_budget()
    first, second = b.scaled(classification_share), b.scaled(1.0 - classification_share)
    if b.kind == "pure":
        sens = m * m / n
        return NoiseParameters("laplace", sens / first.epsilon, sens / second.epsilon)
    if b.kind == "zcdp":
        if sigma is not None:
            return NoiseParameters("gaussian", sigma, sigma)
        return NoiseParameters("gaussian", (m / n) / math.sqrt(2.0 * first.rho),
                               (math.sqrt(2.0) * m / n) / math.sqrt(2.0 * second.rho))
    raise InvalidParameterError(f"large-n aggregation supports pure and zcdp budgets, not {budget.kind!r}")


def _draw(kind: str, scale: float, rng, size) -> np.ndarray:
    if kind == "laplace":
        return sample_laplace(scale, rng, size=size)
    return sample_gaussian(scale, rng, size=size)


def classify_pairs(w: np.ndarray, kind: str, scale: float, rng) -> PairClassification:
    """One noise draw per unordered pair; cut the noisy upper-triangle weight at 1/6 and 5/6."""
    m = w.shape[0]
    iu, iv = np.triu_indices(m, k=1)
    noisy = w[iu, iv] + _draw(kind, scale, rng, iu.shape)
    high = noisy > UPPER_CUT
    low = noisy < LOWER_CUT
    mid = ~(high | low)
    imbalanced = np.vstack([np.column_stack([iu[high], iv[high]]), np.column_stack([iv[low], iu[low]])])
    balanced = np.column_stack([iu[mid], iv[mid]])
    return PairClassification(m, imbalanced.astype(np.int64), balanced.astype(np.int64))


def transformed_exact(w: np.ndarray, cls: PairClassification) -> np.ndarray:
    """Un-noised transformed matrix: winner keeps ``w_uv - w_vu``, loser 0; balanced pairs unchanged."""
    out = np.zeros_like(w, dtype=float)
    u, v = cls.imbalanced[:, 0], cls.imbalanced[:, 1]
    out[u, v] = w[u, v] - w[v, u]
    bu, bv = cls.balanced[:, 0], cls.balanced[:, 1]
    out[bu, bv] = w[bu, bv]
    out[bv, bu] = w[bv, bu]
    return out


def imbalanced_offset(w: np.ndarray, cls: PairClassification) -> float:
    """``sum_{(u, v) in Z_I} w[v, u]``, the ranking-independent part of the cost."""
    return float(w[cls.imbalanced[:, 1], cls.imbalanced[:, 0]].sum())


def build_transformed(w: np.ndarray, cls: PairClassification, kind: str, scale: float, rng) -> np.ndarray:
    """Noisy transformed matrix; balanced pairs sum to exactly 1, imbalanced losers are exactly 0."""
    out = np.zeros_like(w, dtype=float)
    u, v = cls.imbalanced[:, 0], cls.imbalanced[:, 1]
    out[u, v] = w[u, v] - w[v, u] + _draw(kind, scale, rng, u.shape)
    bu, bv = cls.balanced[:, 0], cls.balanced[:, 1]
    # snap to a 2^-40 grid so that 1 - upper is exact and the pair sums to exactly 1
    upper = np.ldexp(np.round(np.ldexp(w[bu, bv] + _draw(kind, scale, rng, bu.shape), _SNAP_BITS)), -_SNAP_BITS)
    out[bu, bv] = upper
    out[bv, bu] = 1.0 - upper
    return out


def kemeny_large_n(data: RankingDataset, budget: PrivacyBudget, *, ledger: BudgetLedger | None = None, rng=None,
                   classification_share: float = 0.5, sigma: float | None = None,
                   exact_threshold: int = EXACT_THRESHOLD, threshold: float | None = None,
                   report: dict | None = None) -> Ranking:
    """Classify, transform, then solve the bounded instance or fall back to a random ranking.

    ``threshold`` replaces the stated regime boundary; falling below it only warns.
    """
    m, n = data.m, data.n
    params = noise_parameters(m, n, budget, classification_share=classification_share, sigma=sigma)
    threshold = large_n_threshold(m, budget) if threshold is None else float(threshold)
    if n < threshold:
        logger.warning("n=%d is below the large-n threshold %.0f for m=%d", n, threshold, m)
    b = budget.as_mechanism_budget()
    charge(ledger, b.scaled(classification_share), "large_n.classification")
    charge(ledger, b.scaled(1.0 - classification_share), "large_n.noise_addition")
    gen = as_rng(rng)

    w = pairwise_matrix(data)
    cls = classify_pairs(w, params.kind, params.classification, gen)
    w_noisy = build_transformed(w, cls, params.kind, params.addition, gen)
    bounded = is_bounded(w_noisy)
    if bounded:
        result = solve_bounded(w_noisy, exact_threshold=exact_threshold, rng=gen)
    else:
        result = Ranking(tuple((gen.permutation(m) + 1).tolist()))
    if report is not None:
        report.update({
            "fallback_used": not bounded,
            "bounded": bounded,
            "imbalanced_pairs": int(len(cls.imbalanced)),
            "balanced_pairs": int(len(cls.balanced)),
            "noise": {"kind": params.kind, "classification": params.classification, "addition": params.addition},
            "threshold": threshold,
        })
    return result
