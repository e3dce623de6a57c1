"""Synthetic ranking datasets for experiments."""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameterError
from .privacy import as_rng
from .rankings import Ranking, RankingDataset


def _center(m: int, center: Ranking | None) -> Ranking:
    if center is None:
        return Ranking.identity(m)
    if center.m != m:
        raise InvalidParameterError(f"center has m={center.m}, expected {m}")
    return center


def generate_mallows(m: int, n: int, phi: float, center: Ranking | None = None, rng=None) -> RankingDataset:
    """``n`` i.i.d. Mallows samples by repeated insertion, vectorized over voters.

    The ``i``-th candidate of the center (0-based) is inserted ``k`` slots before
    the end of the current list with probability proportional to ``phi**k``,
    creating ``k`` new inversions. ``phi = 0`` is the limit concentrated on the
    center and ``phi = 1`` gives uniform permutations.
    """
    if not 0.0 <= phi <= 1.0:
        raise InvalidParameterError(f"phi must lie in [0, 1], got {phi}")
    if m < 1 or n < 1:
        raise InvalidParameterError("m and n must be positive")
    center = _center(m, center)
    rng = as_rng(rng)
    order = np.asarray(center.order()) - 1
    slots = np.zeros((n, m), dtype=np.int64)  # 0-based slot of the i-th inserted candidate
    for i in range(m):
        u = rng.random(n)
        if phi == 0.0:
            back = np.zeros(n, dtype=np.int64)
        elif phi == 1.0:
            back = np.floor(u * (i + 1)).astype(np.int64)
        else:
            # inverse CDF of the geometric law truncated to 0..i
            back = np.floor(np.log1p(-u * (1.0 - phi ** (i + 1))) / np.log(phi)).astype(np.int64)
        back = np.minimum(back, i)
        slot = i - back
        if i:
            prior = slots[:, :i]
            prior += prior >= slot[:, None]
        slots[:, i] = slot
    positions = np.empty((n, m), dtype=np.int64)
    positions[:, order] = slots + 1
    return RankingDataset(positions, validate=False)


def generate_uniform(m: int, n: int, rng=None) -> RankingDataset:
    rng = as_rng(rng)
    return RankingDataset(np.argsort(rng.random((n, m)), axis=1) + 1, validate=False)


def generate_unanimous(m: int, n: int, center: Ranking | None = None) -> RankingDataset:
    center = _center(m, center)
    return RankingDataset(np.tile(center.as_array(), (n, 1)), validate=False)


def generate_two_block(m: int, n: int) -> RankingDataset:
    """Half the voters rank the first block of candidates above the second, half the reverse.

    Within a block candidates keep their index order.
    """
    half = m // 2
    top_first = np.arange(1, m + 1)
    bottom_first = np.concatenate([np.arange(half + 1, m + 1), np.arange(1, half + 1)])
    rows = np.empty((n, m), dtype=np.int64)
    rows[: n // 2 + n % 2] = top_first
    rows[n // 2 + n % 2:] = bottom_first
    return RankingDataset(rows, validate=False)


GENERATORS = ("mallows", "uniform", "unanimous", "two-block")


def generate(name: str, m: int, n: int, *, phi: float = 0.5, center: Ranking | None = None, rng=None) -> RankingDataset:
    if name == "mallows":
        return generate_mallows(m, n, phi, center, rng)
    if name == "uniform":
        return generate_uniform(m, n, rng)
    if name == "unanimous":
        return generate_unanimous(m, n, center)
    if name == "two-block":
        return generate_two_block(m, n)
    raise InvalidParameterError(f"unknown generator {name!r}; choose from {', '.join(GENERATORS)}")
