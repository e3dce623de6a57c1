"""Private mean estimation for bounded-norm vectors.

Three backends share one contract (unbiased estimate of the mean of ``n``
vectors whose norm is at most ``C``):

* central Laplace, l1 bound, epsilon-DP;
* central Gaussian, l2 bound, rho-zCDP;
* local randomizer + averaging analyst, l2 bound, epsilon-LDP.

Under replacement of one contributor the mean moves by at most ``2C/n`` in the
declared norm, which is the sensitivity both central backends calibrate to.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import IO, Literal

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .privacy import derive_rng, noise_is_disabled, sample_gaussian, sample_laplace

logger = logging.getLogger(__name__)

LocalMechanism = Literal["laplace", "sphere"]

_NORM_SLACK = 1e-9


def _norms(vectors: np.ndarray, p: int) -> np.ndarray:
    return np.linalg.norm(vectors, ord=p, axis=-1)


def clip_to_norm(vectors: np.ndarray, bound: float, p: int) -> np.ndarray:
    """Rescale rows whose ``p``-norm exceeds ``bound``; logs a warning if any do."""
    vectors = np.asarray(vectors, dtype=float)
    norms = _norms(vectors, p)
    over = norms > bound * (1 + _NORM_SLACK)
    if np.any(over):
        logger.warning("%d vector(s) exceed declared l%d bound %g; rescaling", int(np.sum(over)), p, bound)
        vectors = vectors.copy()
        scale = np.where(over, bound / np.where(over, norms, 1.0), 1.0)
        vectors *= scale[..., None] if vectors.ndim > 1 else scale
    return vectors


def _as_matrix(vectors) -> np.ndarray:
    arr = np.asarray(vectors, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise InvalidInputError("expected a non-empty (n, d) array of vectors")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("vectors must be finite")
    return arr


def laplace_mean_scale(bound: float, n: int, epsilon: float) -> float:
    """Per-coordinate Laplace scale for the mean: (2C/n)/epsilon."""
    if epsilon <= 0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
    return 2.0 * bound / (n * epsilon)


def gaussian_mean_sigma(bound: float, n: int, rho: float) -> float:
    """Per-coordinate Gaussian sigma for the mean: (2C/n)/sqrt(2 rho)."""
    if rho <= 0:
        raise InvalidParameterError(f"rho must be positive, got {rho}")
    return 2.0 * bound / n / math.sqrt(2.0 * rho)


def release_mean_laplace(mean: np.ndarray, n: int, bound: float, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Noise an already-computed mean of ``n`` vectors with l1 norm <= ``bound``."""
    mean = np.asarray(mean, dtype=float)
    scale = laplace_mean_scale(bound, n, epsilon)
    return mean + sample_laplace(scale, rng, size=mean.shape)


def release_mean_gaussian(mean: np.ndarray, n: int, bound: float, rho: float, rng: np.random.Generator) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    sigma = gaussian_mean_sigma(bound, n, rho)
    return mean + sample_gaussian(sigma, rng, size=mean.shape)


def aggregate_laplace(vectors, bound: float, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """epsilon-DP mean of vectors with l1 norm at most ``bound``."""
    arr = clip_to_norm(_as_matrix(vectors), bound, 1)
    return release_mean_laplace(arr.mean(axis=0), arr.shape[0], bound, epsilon, rng)


def aggregate_gaussian(vectors, bound: float, rho: float, rng: np.random.Generator) -> np.ndarray:
    """rho-zCDP mean of vectors with l2 norm at most ``bound``."""
    arr = clip_to_norm(_as_matrix(vectors), bound, 2)
    return release_mean_gaussian(arr.mean(axis=0), arr.shape[0], bound, rho, rng)


# ---------------------------------------------------------------- local model


def local_laplace_scale(bound: float, d: int, epsilon: float) -> float:
    """Per-coordinate scale of the baseline randomizer.

    Two inputs with l2 norm <= C differ by at most ``2 sqrt(d) C`` in l1.
    """
    if epsilon <= 0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
    return 2.0 * math.sqrt(d) * bound / epsilon


def sphere_radius(bound: float, d: int, epsilon: float) -> float:
    """Radius making the hemisphere-sampling randomizer unbiased.

    E[message | v] = radius * c_d * tanh(epsilon/2) * v / C where
    c_d = E|U_1| for U uniform on the unit sphere in R^d.
    """
    if epsilon <= 0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
    log_cd = math.lgamma(d / 2) - 0.5 * math.log(math.pi) - math.lgamma((d + 1) / 2)
    if d == 1:
        log_cd = 0.0
    e = math.exp(epsilon)
    return bound * (e + 1) / (e - 1) * math.exp(-log_cd)


def _sphere_randomize(v: np.ndarray, bound: float, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    k, d = v.shape
    norms = np.linalg.norm(v, axis=1)
    direction = np.empty_like(v)
    nz = norms > 0
    direction[nz] = v[nz] / norms[nz, None]
    if np.any(~nz):
        g = sample_gaussian(1.0, rng, size=(int(np.sum(~nz)), d))
        direction[~nz] = g / np.linalg.norm(g, axis=1, keepdims=True)
    # randomized rounding to +-C * direction, then a biased hemisphere draw
    keep = rng.random(k) < 0.5 + norms / (2.0 * bound)
    pole = np.where(keep, 1.0, -1.0)[:, None] * direction
    toward = rng.random(k) < math.exp(epsilon) / (math.exp(epsilon) + 1.0)
    z = sample_gaussian(1.0, rng, size=(k, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    side = np.sum(z * pole, axis=1) > 0
    flip = side != toward
    z[flip] *= -1.0
    return sphere_radius(bound, d, epsilon) * z


def ldp_randomize(v, bound: float, epsilon: float, rng: np.random.Generator,
                  mechanism: LocalMechanism = "laplace") -> np.ndarray:
    """epsilon-LDP unbiased report of a vector (or a batch, one row per user).

    ``"laplace"`` adds per-coordinate Laplace noise of scale 2 sqrt(d) C / eps;
    ``"sphere"`` samples from a hemisphere of a fixed-radius sphere biased
    toward a randomized rounding of ``v``.
    """
    arr = np.asarray(v, dtype=float)
    single = arr.ndim == 1
    batch = np.atleast_2d(arr)
    if batch.shape[0] == 0 or not np.all(np.isfinite(batch)):
        raise InvalidInputError("ldp_randomize expects finite vectors")
    batch = clip_to_norm(batch, bound, 2)
    d = batch.shape[1]
    if mechanism == "laplace":
        out = batch + sample_laplace(local_laplace_scale(bound, d, epsilon), rng, size=batch.shape)
    elif mechanism == "sphere":
        if epsilon <= 0:
            raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
        out = batch.copy() if noise_is_disabled() else _sphere_randomize(batch, bound, epsilon, rng)
    else:
        raise InvalidParameterError(f"unknown local mechanism {mechanism!r}")
    return out[0] if single else out


def ldp_analyze(messages) -> np.ndarray:
    """Analyst: the arithmetic mean of the users' messages."""
    arr = np.asarray(messages, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise InvalidInputError("ldp_analyze expects a non-empty (n, d) array of messages")
    return arr.mean(axis=0)


@dataclass
class LocalProtocol:
    """Non-interactive local protocol simulation over a stream of user vectors.

    By default all users draw from one generator in batch (``rng``, or
    ``derive_rng(seed, 0)``). With ``per_user_seeds=True`` or a message log,
    user ``i`` draws from ``derive_rng(seed, 1, i)`` and its message is logged
    as one JSON line ``{user, seed, message}``.
    """

    bound: float
    epsilon: float
    rng: np.random.Generator | None = None
    seed: int | None = None
    mechanism: LocalMechanism = "laplace"
    per_user_seeds: bool = False
    message_log: IO[str] | None = None

    def __post_init__(self) -> None:
        if (self.per_user_seeds or self.message_log is not None) and self.seed is None:
            raise InvalidParameterError("per-user randomness needs an integer seed")
        self._rng = self.rng if self.rng is not None else derive_rng(self.seed, 0)
        self._total: np.ndarray | None = None
        self._count = 0

    def submit(self, vectors: np.ndarray) -> None:
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        if self.per_user_seeds or self.message_log is not None:
            msgs = np.empty_like(vectors)
            for k, vec in enumerate(vectors):
                user = self._count + k
                msgs[k] = ldp_randomize(vec, self.bound, self.epsilon, derive_rng(self.seed, 1, user), self.mechanism)
                if self.message_log is not None:
                    record = {"user": user, "seed": [self.seed, 1, user], "message": msgs[k].tolist()}
                    self.message_log.write(json.dumps(record) + "\n")
        else:
            msgs = ldp_randomize(vectors, self.bound, self.epsilon, self._rng, self.mechanism)
        self._total = msgs.sum(axis=0) if self._total is None else self._total + msgs.sum(axis=0)
        self._count += vectors.shape[0]

    def estimate(self) -> np.ndarray:
        if self._total is None:
            raise InvalidInputError("no messages submitted")
        return self._total / self._count


def aggregate_local(vectors, bound: float, epsilon: float, seed: int | None = None,
                    mechanism: LocalMechanism = "laplace") -> np.ndarray:
    """Randomize every row locally, then average (one-shot convenience)."""
    arr = _as_matrix(vectors)
    proto = LocalProtocol(bound, epsilon, seed=seed, mechanism=mechanism)
    proto.submit(arr)
    return proto.estimate()
