import itertools

import numpy as np
import pytest

from dprank.errors import InvalidInputError
from dprank.footrule import (
    exact_assignment_costs,
    footrule_aggregate,
    kemeny_via_footrule,
    matching_weight,
    min_weight_matching,
)
from dprank.generators import generate_mallows
from dprank.privacy import BudgetLedger, PrivacyBudget
from dprank.rankings import Ranking, RankingDataset, random_ranking
from conftest import brute_min, footrule_total, kemeny_total, random_dataset

PURE = PrivacyBudget.pure(1.0)


def enumeration_min(cost):
    m = cost.shape[0]
    return min(sum(cost[q, p[q]] for q in range(m)) for p in itertools.permutations(range(m)))


def test_matching_examples():
    m = 5
    cost = np.abs(np.arange(m)[:, None] - np.arange(m)[None, :]).astype(float)
    result = min_weight_matching(cost)
    assert result == Ranking.identity(m) and matching_weight(cost, result) == 0
    cost = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]], dtype=float)
    assert min_weight_matching(cost) == Ranking.identity(3)


def test_matching_against_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(50):
        m = int(rng.integers(1, 7))
        cost = rng.normal(size=(m, m))
        assert matching_weight(cost, min_weight_matching(cost)) == pytest.approx(enumeration_min(cost))


def test_matching_beats_random_permutations():
    rng = np.random.default_rng(1)
    for m in (8, 20, 40):
        cost = rng.random((m, m))
        best = matching_weight(cost, min_weight_matching(cost))
        assert best <= matching_weight(cost, Ranking.identity(m)) + 1e-12
        for _ in range(1000):
            assert best <= matching_weight(cost, random_ranking(m, rng)) + 1e-12


def test_matching_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        min_weight_matching(np.array([[0, np.nan], [1, 0]]))
    with pytest.raises(InvalidInputError):
        min_weight_matching(np.zeros((2, 3)))


def test_noiseless_cost_matrix_entries(noiseless):
    from dprank.apxmed import parallel_apx_median
    from dprank.footrule import assignment_costs

    data = random_dataset(np.random.default_rng(2), 6, 25)
    got = assignment_costs(parallel_apx_median(data, PURE))
    pos = data.positions
    oracle = np.array([[sum(abs(int(r[q]) - j) for r in pos) / len(pos) for j in range(1, 7)] for q in range(6)])
    assert np.allclose(got, oracle, atol=1e-9)
    assert np.allclose(exact_assignment_costs(data), oracle, atol=1e-12)


@pytest.mark.parametrize("budget", [PURE, PrivacyBudget.zcdp(0.5), PrivacyBudget.ldp(1.0)])
def test_noiseless_footrule_optimal(noiseless, budget):
    rng = np.random.default_rng(3)
    for _ in range(40):
        m = int(rng.integers(1, 8))
        data = random_dataset(rng, m, int(rng.integers(1, 30)))
        out = footrule_aggregate(data, budget, rng=0)
        assert footrule_total(data, out) == brute_min(data, footrule_total)


def test_noiseless_kemeny_two_approx(noiseless):
    rng = np.random.default_rng(4)
    for _ in range(40):
        m = int(rng.integers(1, 8))
        data = random_dataset(rng, m, int(rng.integers(1, 30)))
        out = kemeny_via_footrule(data, PURE)
        assert kemeny_total(data, out) <= 2 * brute_min(data, kemeny_total)


def test_unanimous_returns_that_ranking(noiseless):
    sigma = Ranking((3, 1, 4, 2, 5))
    data = RankingDataset([sigma.positions] * 9)
    assert footrule_aggregate(data, PURE) == sigma
    assert kemeny_total(data, kemeny_via_footrule(data, PURE)) == 0


def test_one_ledger_spend_and_valid_output():
    ledger = BudgetLedger(PURE)
    data = random_dataset(np.random.default_rng(5), 7, 50)
    out = footrule_aggregate(data, PURE, ledger=ledger, rng=1)
    assert sorted(out.positions) == list(range(1, 8))
    assert [label for label, _ in ledger.history] == ["parallel_apx_median"]
    assert ledger.audit()["exact"]


def _apxmed_linf(data, budget, rng):
    from dprank.apxmed import parallel_apx_median

    est = parallel_apx_median(data, budget, rng=rng)
    return np.abs(est.T - exact_assignment_costs(data)).max()


def test_excess_bounded_by_measured_apxmed_error():
    # per run: F(out) - OPT <= 2 m * (l_inf error of that run's cost matrix)
    rng = np.random.default_rng(6)
    m, n = 8, 2000
    excess, errors = [], []
    center = random_ranking(m, rng)
    data = generate_mallows(m, n, 0.5, center, rng)
    opt = brute_min(data, footrule_total) / n
    for trial in range(20):
        seed = 1000 + trial
        out = footrule_aggregate(data, PURE, rng=seed)
        err = _apxmed_linf(data, PURE, seed)
        excess.append(footrule_total(data, out) / n - opt)
        errors.append(err)
        assert excess[-1] <= 2 * m * err + 1e-9
    assert np.mean(excess) <= 2 * m * np.mean(errors)


def test_kemeny_mean_cost_within_two_opt_plus_measured_excess():
    rng = np.random.default_rng(7)
    m, n = 6, 1000
    data = generate_mallows(m, n, 0.6, random_ranking(m, rng), rng)
    kem_opt = brute_min(data, kemeny_total) / n
    foot_opt = brute_min(data, footrule_total) / n
    kem, foot_excess = [], []
    for trial in range(50):
        out = kemeny_via_footrule(data, PURE, rng=trial)
        kem.append(kemeny_total(data, out) / n)
        foot_excess.append(footrule_total(data, out) / n - foot_opt)
    assert np.mean(kem) <= 2 * kem_opt + np.mean(foot_excess) + 1e-9
