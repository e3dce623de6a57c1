"""Rankings, datasets, distances and the pairwise comparison matrix.

A ranking over ``m`` candidates is stored as a candidate -> position map with
1-indexed semantics: ``positions[j - 1]`` is the position of candidate ``j``.
A dataset of ``n`` rankings is an immutable ``(n, m)`` integer array of such
position vectors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Literal, Sequence

import numpy as np

from .errors import InvalidInputError, UnsupportedSizeError

Metric = Literal["kendall", "footrule"]

BRUTE_FORCE_MAX_M = 10


def _is_permutation(values: np.ndarray) -> bool:
    m = values.shape[-1]
    return bool(np.array_equal(np.sort(values, axis=-1), np.broadcast_to(np.arange(1, m + 1), values.shape)))


@dataclass(frozen=True)
class Ranking:
    """A full ranking; ``positions[j-1]`` is the (1-based) position of candidate ``j``."""

    positions: tuple[int, ...]

    def __post_init__(self) -> None:
        pos = tuple(int(p) for p in self.positions)
        object.__setattr__(self, "positions", pos)
        if not pos or not _is_permutation(np.asarray(pos)):
            raise InvalidInputError(f"positions {pos} are not a permutation of 1..{len(pos)}")

    @property
    def m(self) -> int:
        return len(self.positions)

    def __len__(self) -> int:
        return len(self.positions)

    def __getitem__(self, candidate: int) -> int:
        """Position of a 1-indexed candidate."""
        if not 1 <= candidate <= self.m:
            raise IndexError(candidate)
        return self.positions[candidate - 1]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.positions, dtype=np.int64)

    def order(self) -> tuple[int, ...]:
        """Candidates listed from first to last place (the inverse permutation)."""
        inv = [0] * self.m
        for cand, pos in enumerate(self.positions, start=1):
            inv[pos - 1] = cand
        return tuple(inv)

    @classmethod
    def from_order(cls, order: Sequence[int]) -> "Ranking":
        """Build from a list of candidates in rank order (first place first)."""
        pos = [0] * len(order)
        for place, cand in enumerate(order, start=1):
            if not 1 <= cand <= len(order):
                raise InvalidInputError(f"candidate {cand} out of range")
            pos[cand - 1] = place
        return cls(tuple(pos))

    @classmethod
    def identity(cls, m: int) -> "Ranking":
        return cls(tuple(range(1, m + 1)))

    @classmethod
    def reversal(cls, m: int) -> "Ranking":
        return cls(tuple(range(m, 0, -1)))

    def __str__(self) -> str:
        return ",".join(map(str, self.positions))


class RankingDataset:
    """``n >= 1`` full rankings over a common candidate set ``[m]``.

    Stored as a read-only ``(n, m)`` int64 array of 1-based positions.
    """

    __slots__ = ("_positions",)

    def __init__(self, positions: np.ndarray | Sequence[Sequence[int]], *, validate: bool = True):
        arr = np.array(positions, dtype=np.int64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidInputError("dataset must be a non-empty (n, m) array of rankings")
        if validate:
            m = arr.shape[1]
            ok = np.all(np.sort(arr, axis=1) == np.arange(1, m + 1), axis=1)
            if not ok.all():
                bad = int(np.flatnonzero(~ok)[0])
                raise InvalidInputError(f"ranking {bad + 1} is not a permutation of 1..{m}")
        arr.flags.writeable = False
        self._positions = arr

    @classmethod
    def from_rankings(cls, rankings: Iterable[Ranking]) -> "RankingDataset":
        rows = [r.positions for r in rankings]
        if not rows:
            raise InvalidInputError("dataset must contain at least one ranking")
        if len({len(r) for r in rows}) != 1:
            raise InvalidInputError("all rankings must have the same number of candidates")
        return cls(rows, validate=False)

    @property
    def positions(self) -> np.ndarray:
        return self._positions

    @property
    def n(self) -> int:
        return self._positions.shape[0]

    @property
    def m(self) -> int:
        return self._positions.shape[1]

    def __len__(self) -> int:
        return self.n

    def __iter__(self) -> Iterator[Ranking]:
        for row in self._positions:
            yield Ranking(tuple(row.tolist()))

    def __getitem__(self, i: int) -> Ranking:
        return Ranking(tuple(self._positions[i].tolist()))

    def replace(self, i: int, ranking: Ranking) -> "RankingDataset":
        """Neighboring dataset with ranking ``i`` swapped out."""
        if ranking.m != self.m:
            raise InvalidInputError("dimension mismatch")
        arr = self._positions.copy()
        arr[i] = ranking.positions
        return RankingDataset(arr, validate=False)

    def __repr__(self) -> str:
        return f"RankingDataset(n={self.n}, m={self.m})"


def _check_same_m(a: Ranking, b: Ranking) -> None:
    if a.m != b.m:
        raise InvalidInputError(f"rankings have different sizes ({a.m} vs {b.m})")


def _count_inversions(seq: list[int]) -> int:
    # bottom-up merge sort
    n = len(seq)
    buf = list(seq)
    tmp = [0] * n
    inversions = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if buf[i] <= buf[j]:
                    tmp[k] = buf[i]
                    i += 1
                else:
                    tmp[k] = buf[j]
                    inversions += mid - i
                    j += 1
                k += 1
            tmp[k:k + mid - i] = buf[i:mid]
            k += mid - i
            tmp[k:k + hi - j] = buf[j:hi]
        buf, tmp = tmp, buf
        width *= 2
    return inversions


def kendall_tau(a: Ranking, b: Ranking) -> int:
    """Number of candidate pairs ordered one way by ``b`` and the other by ``a``.

    O(m log m): list ``a``'s positions in ``b``'s order and count inversions.
    """
    _check_same_m(a, b)
    a_pos = a.positions
    seq = [a_pos[c - 1] for c in b.order()]
    return _count_inversions(seq)


def footrule(a: Ranking, b: Ranking) -> int:
    """Spearman's footrule: sum over candidates of the absolute position gap."""
    _check_same_m(a, b)
    return sum(abs(x - y) for x, y in zip(a.positions, b.positions))


def _total_distance(psi: Ranking, data: RankingDataset, metric: Metric) -> int:
    if psi.m != data.m:
        raise InvalidInputError(f"ranking has m={psi.m}, dataset has m={data.m}")
    if metric == "footrule":
        return int(np.abs(data.positions - psi.as_array()).sum())
    if metric == "kendall":
        return total_kendall_from_counts(pairwise_counts(data), psi)
    raise InvalidInputError(f"unknown metric {metric!r}")


def total_distance(psi: Ranking, data: RankingDataset, metric: Metric) -> int:
    """Exact integer ``sum_i d(psi, pi_i)``."""
    return _total_distance(psi, data, metric)


def avg_distance(psi: Ranking, data: RankingDataset, metric: Metric) -> float:
    """Mean distance ``(1/n) sum_i d(psi, pi_i)``."""
    if data is None or data.n == 0:
        raise InvalidInputError("empty dataset")
    return _total_distance(psi, data, metric) / data.n


def pairwise_counts(data: RankingDataset, chunk: int = 1 << 15) -> np.ndarray:
    """Integer matrix ``C[u, v] = #{i : pi_i(u) < pi_i(v)}`` (0-indexed candidates)."""
    m = data.m
    counts = np.zeros((m, m), dtype=np.int64)
    pos = data.positions
    for start in range(0, data.n, chunk):
        block = pos[start:start + chunk]
        counts += (block[:, :, None] < block[:, None, :]).sum(axis=0)
    return counts


def pairwise_matrix(data: RankingDataset) -> np.ndarray:
    """Fraction of voters placing ``u`` before ``v``; diagonal is 0.

    Entry ``[u-1, v-1]`` corresponds to candidates ``u, v``.
    """
    return pairwise_counts(data) / data.n


def total_kendall_from_counts(counts: np.ndarray, psi: Ranking) -> int:
    """``sum_{psi(u) < psi(v)} C[v, u]``: total Kendall distance of psi to the data."""
    p = psi.as_array()
    before = p[:, None] < p[None, :]
    return int(counts.T[before].sum())


def _permutation_chunks(m: int, chunk: int) -> Iterator[np.ndarray]:
    perms = itertools.permutations(range(1, m + 1))
    while True:
        block = list(itertools.islice(perms, chunk))
        if not block:
            return
        yield np.asarray(block, dtype=np.int64)


def brute_force_optimal(data: RankingDataset, metric: Metric) -> Ranking:
    """Exact minimizer of the average distance by enumerating all ``m!`` rankings.

    Ties go to the lexicographically smallest position vector. Raises
    :class:`UnsupportedSizeError` for ``m > 10``.
    """
    m = data.m
    if m > BRUTE_FORCE_MAX_M:
        raise UnsupportedSizeError(f"brute force limited to m <= {BRUTE_FORCE_MAX_M}, got m={m}")
    if metric == "footrule":
        # dev[q, j-1] = sum_i |pi_i(q) - j|
        dev = np.abs(data.positions[:, :, None] - np.arange(1, m + 1)[None, None, :]).sum(axis=0)
    elif metric == "kendall":
        counts = pairwise_counts(data)
    else:
        raise InvalidInputError(f"unknown metric {metric!r}")

    best_cost = None
    best = None
    cand = np.arange(m)
    for block in _permutation_chunks(m, 40320):
        if metric == "footrule":
            costs = dev[cand[None, :], block - 1].sum(axis=1)
        else:
            before = block[:, :, None] < block[:, None, :]
            costs = (before * counts.T[None, :, :]).sum(axis=(1, 2))
        i = int(np.argmin(costs))
        if best_cost is None or costs[i] < best_cost:
            best_cost = int(costs[i])
            best = block[i]
    return Ranking(tuple(best.tolist()))


def optimal_cost(data: RankingDataset, metric: Metric) -> float:
    """Average distance of the brute-force optimum."""
    return avg_distance(brute_force_optimal(data, metric), data, metric)


def random_ranking(m: int, rng: np.random.Generator) -> Ranking:
    return Ranking(tuple((rng.permutation(m) + 1).tolist()))


def n_pairs(m: int) -> int:
    return math.comb(m, 2)
