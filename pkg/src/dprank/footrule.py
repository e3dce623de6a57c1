"""Private footrule aggregation by minimum-weight bipartite matching.

Candidate ``q`` placed at position ``j`` costs the (private) mean deviation
``(1/n) sum_i |pi_i(q) - j|``; a minimum-weight perfect matching of candidates
to positions minimizes total footrule distance. Since Kendall <= footrule <=
2 Kendall, the same output is a 2-approximation for Kemeny.
"""

from __future__ import annotations

from typing import IO

import numpy as np
from scipy.optimize import linear_sum_assignment

from .apxmed import DEFAULT_KAPPA, parallel_apx_median
from .errors import InvalidInputError
from .privacy import BudgetLedger, PrivacyBudget
from .rankings import Ranking, RankingDataset
from .vecagg import LocalMechanism


def assignment_costs(profile: np.ndarray) -> np.ndarray:
    """Cost matrix with entry ``(q, j)`` from a profile indexed ``[j, q]``."""
    return np.asarray(profile, dtype=float).T


def exact_assignment_costs(data: RankingDataset) -> np.ndarray:
    """Non-private ``cost[q-1, j-1] = (1/n) sum_i |pi_i(q) - j|``."""
    m = data.m
    return np.abs(data.positions[:, :, None] - np.arange(1, m + 1)[None, None, :]).mean(axis=0)


def min_weight_matching(cost) -> Ranking:
    """Minimum-weight perfect matching of candidates (rows) to positions (columns).

    Negative entries are fine: shifting a row by a constant shifts every
    perfect matching's weight equally.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1] or cost.shape[0] == 0:
        raise InvalidInputError("cost matrix must be square and non-empty")
    if not np.all(np.isfinite(cost)):
        raise InvalidInputError("cost matrix has non-finite entries")
    rows, cols = linear_sum_assignment(cost)
    positions = np.empty(cost.shape[0], dtype=np.int64)
    positions[rows] = cols + 1
    return Ranking(tuple(positions.tolist()))


def matching_weight(cost, ranking: Ranking) -> float:
    cost = np.asarray(cost, dtype=float)
    return float(cost[np.arange(ranking.m), ranking.as_array() - 1].sum())


def footrule_aggregate(data: RankingDataset, budget: PrivacyBudget, *, ledger: BudgetLedger | None = None,
                       rng=None, kappa: float = DEFAULT_KAPPA, local_mechanism: LocalMechanism = "laplace",
                       message_log: IO[str] | None = None) -> Ranking:
    """Private footrule aggregation; the model follows ``budget.kind``.

    The whole budget goes to one parallel ApxMed release.
    """
    profile = parallel_apx_median(data, budget, ledger=ledger, rng=rng, kappa=kappa,
                                  local_mechanism=local_mechanism, message_log=message_log)
    return min_weight_matching(assignment_costs(profile))


def kemeny_via_footrule(data: RankingDataset, budget: PrivacyBudget, **kwargs) -> Ranking:
    """Same pipeline as :func:`footrule_aggregate`, used as a Kemeny 2-approximation."""
    return footrule_aggregate(data, budget, **kwargs)
