import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dprank.errors import InvalidInputError, UnsupportedSizeError
from dprank.rankings import (
    Ranking,
    RankingDataset,
    avg_distance,
    brute_force_optimal,
    footrule,
    kendall_tau,
    pairwise_matrix,
    random_ranking,
    total_distance,
)
from conftest import brute_min, kemeny_total, kendall_oracle, random_dataset

permutations = st.integers(1, 40).flatmap(lambda m: st.permutations(list(range(1, m + 1))))


def test_ranking_rejects_non_permutation():
    with pytest.raises(InvalidInputError):
        Ranking((1, 1, 2))
    with pytest.raises(InvalidInputError):
        Ranking(())


def test_order_round_trip():
    r = Ranking((3, 1, 2))
    assert r.order() == (2, 3, 1)
    assert Ranking.from_order(r.order()) == r
    assert r[1] == 3


def test_dataset_validation_and_immutability():
    with pytest.raises(InvalidInputError, match="ranking 2"):
        RankingDataset([[1, 2], [2, 2]])
    data = RankingDataset([[1, 2], [2, 1]])
    with pytest.raises(ValueError):
        data.positions[0, 0] = 5
    neighbor = data.replace(0, Ranking((2, 1)))
    assert neighbor.positions.tolist() == [[2, 1], [2, 1]]
    assert data.positions.tolist() == [[1, 2], [2, 1]]


@pytest.mark.parametrize(
    "a, b, expected",
    [
        (Ranking.identity(4), Ranking.identity(4), 0),
        (Ranking.identity(4), Ranking.reversal(4), 6),
        (Ranking((1, 3, 2)), Ranking((1, 2, 3)), 1),
    ],
)
def test_kendall_examples(a, b, expected):
    assert kendall_tau(a, b) == expected


def test_footrule_examples():
    assert footrule(Ranking.identity(4), Ranking.identity(4)) == 0
    assert footrule(Ranking.identity(4), Ranking.reversal(4)) == 8


def test_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        kendall_tau(Ranking.identity(3), Ranking.identity(4))
    with pytest.raises(InvalidInputError):
        footrule(Ranking.identity(3), Ranking.identity(4))


@settings(max_examples=200, deadline=None)
@given(data=st.data(), m=st.integers(1, 60))
def test_distance_properties(data, m):
    a = Ranking(tuple(data.draw(st.permutations(list(range(1, m + 1))))))
    b = Ranking(tuple(data.draw(st.permutations(list(range(1, m + 1))))))
    k, f = kendall_tau(a, b), footrule(a, b)
    assert k <= f <= 2 * k
    assert k == kendall_tau(b, a) and f == footrule(b, a)
    assert (k == 0) == (a == b) == (f == 0)
    assert k == kendall_oracle(a.positions, b.positions)


def test_kendall_matches_quadratic_oracle_large_m():
    rng = np.random.default_rng(7)
    for m in (50, 120, 200):
        a, b = random_ranking(m, rng), random_ranking(m, rng)
        assert kendall_tau(a, b) == kendall_oracle(a.positions, b.positions)


def test_avg_distance_examples():
    same = RankingDataset([[1, 2, 3, 4]] * 2)
    mixed = RankingDataset([[1, 2, 3, 4], [4, 3, 2, 1]])
    ident = Ranking.identity(4)
    assert avg_distance(ident, same, "kendall") == 0
    assert avg_distance(ident, mixed, "kendall") == 3.0
    assert avg_distance(ident, mixed, "footrule") == 4.0


def test_pairwise_matrix_examples():
    w = pairwise_matrix(RankingDataset([[1, 2, 3]]))
    assert w.tolist() == [[0, 1, 1], [0, 0, 1], [0, 0, 0]]
    w = pairwise_matrix(RankingDataset([[1, 2, 3], [3, 2, 1]]))
    assert np.array_equal(w, 0.5 * (1 - np.eye(3)))


def test_pairwise_matrix_triple_loop_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        data = random_dataset(rng, 4, 3)
        pos = data.positions
        oracle = np.zeros((4, 4))
        for row in pos:
            for u in range(4):
                for v in range(4):
                    oracle[u, v] += row[u] < row[v]
        assert np.allclose(pairwise_matrix(data), oracle / 3, atol=0)


def test_pairwise_complementarity_and_cost_identity():
    rng = np.random.default_rng(1)
    for _ in range(30):
        m = int(rng.integers(2, 9))
        data = random_dataset(rng, m, int(rng.integers(1, 40)))
        w = pairwise_matrix(data)
        off = ~np.eye(m, dtype=bool)
        assert np.allclose((w + w.T)[off], 1.0, atol=1e-12)
        psi = random_ranking(m, rng)
        p = psi.as_array()
        cost = sum(w[v, u] for u in range(m) for v in range(m) if p[u] < p[v])
        assert avg_distance(psi, data, "kendall") == pytest.approx(cost, abs=1e-12)
        assert total_distance(psi, data, "kendall") == kemeny_total(data, psi)


def test_brute_force_examples():
    data = RankingDataset([[1, 2, 3]] * 3)
    assert brute_force_optimal(data, "kendall") == Ranking.identity(3)
    assert brute_force_optimal(data, "footrule") == Ranking.identity(3)
    data = RankingDataset([[1, 2, 3], [1, 2, 3], [3, 2, 1]])
    best = brute_force_optimal(data, "kendall")
    assert best == Ranking((1, 2, 3))
    assert avg_distance(best, data, "kendall") == 1.0


def test_brute_force_beats_samples_and_oracle():
    rng = np.random.default_rng(3)
    data = random_dataset(rng, 5, 11)
    best = brute_force_optimal(data, "kendall")
    cost = avg_distance(best, data, "kendall")
    for _ in range(100):
        assert cost <= avg_distance(random_ranking(5, rng), data, "kendall")
    assert total_distance(best, data, "kendall") == brute_min(data, kemeny_total)


def test_brute_force_size_guard():
    with pytest.raises(UnsupportedSizeError):
        brute_force_optimal(RankingDataset([list(range(1, 12))]), "kendall")
