"""One entry point for every private aggregation objective."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Literal

from .apxmed import DEFAULT_KAPPA
from .combiner import kemeny_ptas
from .errors import InvalidParameterError
from .footrule import footrule_aggregate
from .privacy import BudgetLedger, PrivacyBudget
from .rankings import Metric, Ranking, RankingDataset, avg_distance
from .vecagg import LocalMechanism

Objective = Literal["footrule", "kemeny2", "kemeny-ptas"]
OBJECTIVES = ("footrule", "kemeny2", "kemeny-ptas")


def objective_metric(objective: str) -> Metric:
    if objective not in OBJECTIVES:
        raise InvalidParameterError(f"unknown objective {objective!r}")
    return "footrule" if objective == "footrule" else "kendall"


@dataclass
class AggregationResult:
    ranking: Ranking
    objective_value: float
    ledger: BudgetLedger
    details: dict = field(default_factory=dict)


def run_aggregation(data: RankingDataset, objective: Objective, budget: PrivacyBudget, *, seed: int | None = None,
                    regime: str = "auto", n_buckets: int | None = None, kappa: float = DEFAULT_KAPPA,
                    local_mechanism: LocalMechanism = "laplace", message_log: IO[str] | None = None,
                    large_sigma: float | None = None) -> AggregationResult:
    """Run ``objective`` against a fresh ledger holding exactly ``budget``."""
    metric = objective_metric(objective)
    ledger = BudgetLedger(budget)
    details: dict = {}
    if objective == "kemeny-ptas":
        if budget.kind == "ldp":
            raise InvalidParameterError("kemeny-ptas has no local-model variant; use footrule or kemeny2")
        ranking = kemeny_ptas(data, budget, regime=regime, ledger=ledger, seed=seed, n_buckets=n_buckets,
                              kappa=kappa, large_sigma=large_sigma, report=details)
    else:
        ranking = footrule_aggregate(data, budget, ledger=ledger, rng=seed, kappa=kappa,
                                     local_mechanism=local_mechanism, message_log=message_log)
    return AggregationResult(ranking, avg_distance(ranking, data, metric), ledger, details)
