"""Private selection between two candidate rankings, and the full Kemeny pipeline.

``kemeny_ptas`` splits its budget into thirds: the regime algorithm (small-
or large-``n``), the footrule 2-approximation as a fallback, and a noisy
comparison of their Kemeny costs that keeps the cheaper one.
"""

from __future__ import annotations

import math
from typing import Literal

import numpy as np

from .apxmed import DEFAULT_KAPPA
from .errors import InvalidInputError, InvalidParameterError
from .footrule import kemeny_via_footrule
from .kemeny_large import kemeny_large_n, large_n_threshold
from .kemeny_small import kemeny_small_n
from .privacy import BudgetLedger, PrivacyBudget, charge, derive_rng, sample_gaussian, sample_laplace
from .rankings import Ranking, RankingDataset, pairwise_counts, total_kendall_from_counts
from .wfas import EXACT_THRESHOLD

Regime = Literal["auto", "small", "large"]


def comparison_sensitivity(m: int, n: int) -> float:
    """Bound on how far the cost gap of two fixed rankings moves when one voter changes."""
    return 2.0 * m * m / n


def comparison_noise(m: int, n: int, budget: PrivacyBudget) -> tuple[str, float]:
    b = budget.as_mechanism_budget()
    sens = comparison_sensitivity(m, n)
    if b.kind == "pure":
        return "laplace", sens / b.epsilon
    if b.kind == "zcdp":
        return "gaussian", sens / math.sqrt(2.0 * b.rho)
    raise InvalidParameterError(f"combiner supports pure and zcdp budgets, not {budget.kind!r}")


def combine(first: Ranking, second: Ranking, data: RankingDataset, budget: PrivacyBudget, *,
            ledger: BudgetLedger | None = None, rng=None, report: dict | None = None) -> Ranking:
    """Return ``second`` if its cost plus noise is lower than ``first``'s, else ``first``."""
    if first.m != data.m or second.m != data.m:
        raise InvalidInputError("rankings and dataset disagree on m")
    kind, scale = comparison_noise(data.m, data.n, budget)
    charge(ledger, budget.as_mechanism_budget(), "combiner")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    # integer totals keep exact ties exact, so a tie always returns ``first``
    counts = pairwise_counts(data)
    gap = (total_kendall_from_counts(counts, first) - total_kendall_from_counts(counts, second)) / data.n
    noise = sample_laplace(scale, gen) if kind == "laplace" else sample_gaussian(scale, gen)
    pick_second = gap + noise > 0
    if report is not None:
        report.update({"cost_gap": gap, "noise": noise, "noise_kind": kind, "noise_scale": scale,
                       "picked": "second" if pick_second else "first"})
    return second if pick_second else first


def select_regime(m: int, n: int, budget: PrivacyBudget, regime: Regime = "auto") -> str:
    if regime in ("small", "large"):
        return regime
    if regime != "auto":
        raise InvalidParameterError(f"unknown regime {regime!r}")
    return "large" if n >= large_n_threshold(m, budget) else "small"


def kemeny_ptas(data: RankingDataset, budget: PrivacyBudget, *, regime: Regime = "auto",
                ledger: BudgetLedger | None = None, seed: int | None = None, n_buckets: int | None = None,
                kappa: float = DEFAULT_KAPPA, exact_threshold: int = EXACT_THRESHOLD,
                large_sigma: float | None = None, report: dict | None = None) -> Ranking:
    """Private Kemeny aggregation combining the regime algorithm with the footrule fallback.

    Stage ``k`` draws its randomness from ``derive_rng(seed, k)``. The auto
    regime compares ``n`` with the large-``n`` threshold at the share of the
    budget the regime algorithm receives.
    """
    b = budget.as_mechanism_budget()
    if b.kind not in ("pure", "zcdp"):
        raise InvalidParameterError(f"kemeny_ptas supports pure, zcdp and approx budgets, not {budget.kind!r}")
    share = b.scaled(1.0 / 3.0)
    branch = select_regime(data.m, data.n, share, regime)

    regime_report: dict = {}
    if branch == "large":
        first = kemeny_large_n(data, share, ledger=ledger, rng=derive_rng(seed, 0), sigma=large_sigma,
                               exact_threshold=exact_threshold, report=regime_report)
    else:
        first = kemeny_small_n(data, share, n_buckets, ledger=ledger, rng=derive_rng(seed, 0),
                               exact_threshold=exact_threshold, report=regime_report)
    second = kemeny_via_footrule(data, share, ledger=ledger, rng=derive_rng(seed, 1), kappa=kappa)
    combine_report: dict = {}
    result = combine(first, second, data, share, ledger=ledger, rng=derive_rng(seed, 2), report=combine_report)
    if report is not None:
        report.update({
            "regime": branch,
            "threshold": large_n_threshold(data.m, share),
            "regime_details": regime_report,
            "combiner": combine_report,
            # the fallback is a 2-approximation, so the guaranteed factor is max(1 + xi, 2)
            "fallback": "footrule 2-approximation",
        })
    return result
