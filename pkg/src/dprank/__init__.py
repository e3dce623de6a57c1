"""Differentially private rank aggregation under Kendall tau and footrule distances."""

from .apxmed import apx_median, build_tree, parallel_apx_median
from .combiner import combine, kemeny_ptas
from .errors import (
    BudgetExhaustedError,
    ContractViolationError,
    DPRankError,
    InvalidInputError,
    InvalidParameterError,
    UnsupportedSizeError,
)
from .footrule import footrule_aggregate, kemeny_via_footrule, min_weight_matching
from .generators import generate_mallows
from .kemeny_large import kemeny_large_n
from .kemeny_small import estimate_w_small_n, kemeny_small_n
from .pipeline import run_aggregation
from .privacy import BudgetLedger, PrivacyBudget, clip_matrix, noise_disabled
from .rankings import Ranking, RankingDataset, brute_force_optimal, footrule, kendall_tau, pairwise_matrix
from .wfas import is_bounded, solve_bounded, wfas_cost

__version__ = "0.1.0"

__all__ = [
    "BudgetExhaustedError", "BudgetLedger", "ContractViolationError", "DPRankError", "InvalidInputError",
    "InvalidParameterError", "PrivacyBudget", "Ranking", "RankingDataset", "UnsupportedSizeError",
    "apx_median", "brute_force_optimal", "build_tree", "clip_matrix", "combine", "estimate_w_small_n",
    "footrule", "footrule_aggregate", "generate_mallows", "is_bounded", "kemeny_large_n", "kemeny_ptas",
    "kemeny_small_n", "kemeny_via_footrule", "kendall_tau", "min_weight_matching", "noise_disabled",
    "pairwise_matrix", "parallel_apx_median", "run_aggregation", "solve_bounded", "wfas_cost",
]
