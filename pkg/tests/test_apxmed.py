import numpy as np
import pytest

from dprank.apxmed import (
    DEFAULT_KAPPA,
    apx_median,
    build_tree,
    contribution_mean,
    contribution_norm_bound,
    contribution_table,
    declared_bound,
    estimate_terms,
    geometric_norm_constant,
    mechanism_noise_scale,
    parallel_apx_median,
    weighted_contribution,
)
from dprank.errors import BudgetExhaustedError, InvalidInputError, InvalidParameterError
from dprank.privacy import BudgetLedger, PrivacyBudget
from dprank.rankings import RankingDataset
from conftest import random_dataset

PURE = PrivacyBudget.pure(1.0)
ZCDP = PrivacyBudget.zcdp(0.5)
LDP = PrivacyBudget.ldp(1.0)


def profile_oracle(x, m):
    return np.array([sum(abs(int(v) - j) for v in x) / len(x) for j in range(1, m + 1)])


def test_build_tree_examples():
    tree = build_tree(4)
    assert tree.depth == 2
    intervals = {tree.interval(k) for k in range(tree.n_nodes)}
    assert intervals == {(1, 1), (2, 2), (3, 3), (4, 4), (1, 2), (3, 4), (1, 4)}
    tree = build_tree(5)
    assert (tree.m_padded, tree.depth) == (8, 3)
    tree = build_tree(1)
    assert tree.n_nodes == 1 and tree.root == 0 and tree.sibling[0] == -1


@pytest.mark.parametrize("m", [1, 2, 3, 8, 13, 64])
def test_tree_structure(m):
    tree = build_tree(m)
    for x in range(1, tree.m_padded + 1):
        for level in range(tree.depth + 1):
            containing = [k for k in range(tree.n_nodes)
                          if tree.level[k] == level and tree.lo[k] <= x <= tree.hi[k]]
            assert containing == [tree.node_containing(x, level)]
    for k in range(tree.n_nodes - 1):
        s = tree.sibling[k]
        assert tree.sibling[s] == k and tree.level[s] == tree.level[k]
        assert tree.is_left[k] == (tree.hi[k] < tree.lo[s])
    assert tree.level[tree.root] == tree.depth


@pytest.mark.parametrize("m_padded", [1, 2, 4, 8, 16, 32, 64, 128, 256])
def test_sibling_decomposition(m_padded):
    tree = build_tree(m_padded)
    for j in range(1, m_padded + 1):
        nodes = tree.query_nodes(j)
        assert tree.root not in nodes
        covered = []
        for t in nodes:
            lo, hi = tree.interval(int(tree.sibling[t]))
            covered.extend(range(lo, hi + 1))
        assert sorted(covered) == [v for v in range(1, m_padded + 1) if v != j]


def test_contribution_support_and_norm_bound():
    rng = np.random.default_rng(0)
    for m in (4, 13, 64, 200):
        tree = build_tree(m)
        const2 = geometric_norm_constant(DEFAULT_KAPPA, tree.depth, 2) * tree.m_padded
        for x in rng.integers(1, m + 1, size=50):
            v, u = weighted_contribution(tree, int(x))
            assert np.count_nonzero(u) == tree.depth + 1
            assert set(np.flatnonzero(v)) <= set(np.flatnonzero(u))
            assert np.linalg.norm(v) <= const2 + 1e-9
            assert np.linalg.norm(u) <= const2 + 1e-9
        for p in (1, 2):
            exact = max(np.linalg.norm(np.concatenate(weighted_contribution(tree, x)), ord=p)
                        for x in range(1, m + 1))
            assert contribution_norm_bound(m, DEFAULT_KAPPA, p) == pytest.approx(exact, rel=1e-12)
            bound = 2 ** (1 / p) * geometric_norm_constant(DEFAULT_KAPPA, tree.depth, p) * tree.m_padded
            assert exact <= bound + 1e-9


def test_kappa_range():
    with pytest.raises(InvalidParameterError):
        apx_median([1], 2, PURE, kappa=2.0)
    with pytest.raises(InvalidParameterError):
        contribution_table(4, 1.0)


def test_input_validation():
    with pytest.raises(InvalidInputError):
        apx_median([0, 1], 3, PURE)
    with pytest.raises(InvalidInputError):
        apx_median([4], 3, PURE)


def test_noiseless_example(noiseless):
    est = apx_median([1, 3], 4, PURE)
    assert est[1] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("budget", [PURE, ZCDP, LDP, PrivacyBudget.approx(1.0, 1e-6)])
def test_noiseless_reconstruction(noiseless, budget):
    rng = np.random.default_rng(1)
    for _ in range(30):
        m = int(rng.integers(1, 65))
        x = rng.integers(1, m + 1, size=int(rng.integers(1, 200)))
        assert np.allclose(apx_median(x, m, budget, rng=3), profile_oracle(x, m), atol=1e-9, rtol=0)


def test_noiseless_sphere_backend(noiseless):
    x = np.array([1, 5, 5, 9])
    est = apx_median(x, 9, LDP, rng=0, local_mechanism="sphere")
    assert np.allclose(est, profile_oracle(x, 9), atol=1e-9)


def test_sign_rule_per_node():
    rng = np.random.default_rng(2)
    for m in (2, 7, 16, 33):
        tree = build_tree(m)
        x = rng.integers(1, m + 1, size=40)
        # direct un-weighted node aggregates
        v_agg = np.array([np.sum(((x >= lo) & (x <= hi)) * (x - lo)) for lo, hi in zip(tree.lo, tree.hi)]) / len(x)
        u_agg = np.array([np.sum((x >= lo) & (x <= hi)) * (hi - lo + 1) for lo, hi in zip(tree.lo, tree.hi)]) / len(x)
        for j in range(1, m + 1):
            for _, s, term in estimate_terms(tree, v_agg, u_agg, j):
                lo, hi = tree.interval(s)
                inside = x[(x >= lo) & (x <= hi)]
                assert term == pytest.approx(np.abs(inside - j).sum() / len(x), abs=1e-12)


def test_parallel_noiseless(noiseless):
    rng = np.random.default_rng(3)
    for m in (1, 2, 5, 9, 16):
        data = random_dataset(rng, m, 37)
        est = parallel_apx_median(data, PURE)
        oracle = np.array([[np.abs(data.positions[:, q] - j).mean() for q in range(m)] for j in range(1, m + 1)])
        assert np.allclose(est, oracle, atol=1e-9, rtol=0)


def test_parallel_identity_dataset(noiseless):
    data = RankingDataset([list(range(1, 7))] * 4)
    est = parallel_apx_median(data, ZCDP)
    j, q = np.meshgrid(np.arange(1, 7), np.arange(1, 7), indexing="ij")
    assert np.allclose(est, np.abs(q - j), atol=1e-9)


def test_single_ledger_spend():
    ledger = BudgetLedger(PURE)
    parallel_apx_median(random_dataset(np.random.default_rng(4), 6, 20), PURE, ledger=ledger, rng=0)
    assert len(ledger.history) == 1 and ledger.audit()["exact"]


def test_budget_exhausted_before_noise():
    ledger = BudgetLedger(PrivacyBudget.pure(0.5))
    rng = np.random.default_rng(5)
    state = rng.bit_generator.state
    with pytest.raises(BudgetExhaustedError):
        apx_median([1, 2], 4, PURE, ledger=ledger, rng=rng)
    assert rng.bit_generator.state == state
    assert ledger.consumed == 0.0


def test_neighbor_sensitivity_of_mean():
    rng = np.random.default_rng(6)
    m, n = 12, 30
    for p in (1, 2):
        bound = declared_bound(m, m, DEFAULT_KAPPA, p)
        for _ in range(100):
            data = random_dataset(rng, m, n)
            other = data.replace(int(rng.integers(n)), random_dataset(rng, m, 1)[0])
            gap = contribution_mean(data.positions, m) - contribution_mean(other.positions, m)
            assert np.linalg.norm(gap, ord=p) <= 2 * bound / n + 1e-9


def _mean_linf_error(m, n, budget, trials, seed):
    rng = np.random.default_rng(seed)
    errs = []
    for t in range(trials):
        x = rng.integers(1, m + 1, size=n)
        errs.append(np.abs(apx_median(x, m, budget, rng=rng) - profile_oracle(x, m)).max())
    return float(np.mean(errs))


def test_error_halves_when_n_doubles():
    e1 = _mean_linf_error(16, 500, PURE, 100, 7)
    e2 = _mean_linf_error(16, 1000, PURE, 100, 8)
    assert 1.5 <= e1 / e2 <= 2.5


def test_error_monotone_in_budget():
    assert _mean_linf_error(16, 400, PrivacyBudget.pure(1.0), 100, 9) <= \
        _mean_linf_error(16, 400, PrivacyBudget.pure(0.25), 100, 10)


def test_noise_scale_readback():
    bound = contribution_norm_bound(8, DEFAULT_KAPPA, 1) * 8
    assert mechanism_noise_scale(8, 100, PURE, instances=8) == pytest.approx(2 * bound / (100 * 1.0))
