"""Privacy budgets, a composing ledger, noise samplers and the clip projection.

Budgets compose additively: epsilons under pure DP (and per-user under LDP),
rhos under zCDP. An ``approx`` (epsilon, delta) budget is converted once to the
largest rho whose zCDP-to-approx conversion fits inside it and is then
accounted in rho.

Seeding scheme: a run has one integer root seed. Stage ``k`` of a pipeline draws
from ``derive_rng(root, k)``, i.e. ``SeedSequence(root, spawn_key=(k,))``; nested
stages append further counters (``derive_rng(root, k, j)``).
"""

from __future__ import annotations

import contextvars
import math
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Iterator, Literal

import numpy as np

from .errors import BudgetExhaustedError, InvalidInputError, InvalidParameterError

BudgetKind = Literal["pure", "zcdp", "approx", "ldp"]

LEDGER_TOLERANCE = 1e-12
FEASIBLE_TOLERANCE = 1e-12

_noise_disabled: contextvars.ContextVar[bool] = contextvars.ContextVar("dprank_noise_disabled", default=False)


@contextmanager
def noise_disabled(*, unsafe_for_privacy: bool = False) -> Iterator[None]:
    """Make every sampler return exact zeros inside the block.

    Test-harness only: the resulting outputs carry no privacy guarantee, so the
    caller must pass ``unsafe_for_privacy=True`` explicitly.
    """
    if unsafe_for_privacy is not True:
        raise RuntimeError("noise_disabled() requires unsafe_for_privacy=True")
    token = _noise_disabled.set(True)
    try:
        yield
    finally:
        _noise_disabled.reset(token)


def noise_is_disabled() -> bool:
    return _noise_disabled.get()


def derive_rng(seed: int | None, *path: int) -> np.random.Generator:
    """Child generator ``SeedSequence(seed, spawn_key=path)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path)))


def as_rng(rng: np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


# ---------------------------------------------------------------- samplers


def sample_laplace(scale: float, rng: np.random.Generator, size=None):
    """Laplace(0, scale) by inverse CDF from one uniform per draw."""
    if not scale > 0 or not math.isfinite(scale):
        raise InvalidParameterError(f"Laplace scale must be positive and finite, got {scale}")
    if noise_is_disabled():
        return 0.0 if size is None else np.zeros(size)
    u = rng.random(size) - 0.5
    tail = np.maximum(1.0 - 2.0 * np.abs(u), 2.0**-53)
    out = -scale * np.sign(u) * np.log(tail)
    return float(out) if size is None else out


def sample_gaussian(sigma: float, rng: np.random.Generator, size=None):
    """N(0, sigma^2) by the Box-Muller transform of two uniforms per draw."""
    if not sigma > 0 or not math.isfinite(sigma):
        raise InvalidParameterError(f"Gaussian sigma must be positive and finite, got {sigma}")
    if noise_is_disabled():
        return 0.0 if size is None else np.zeros(size)
    u1 = 1.0 - rng.random(size)  # (0, 1]
    u2 = rng.random(size)
    out = sigma * np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return float(out) if size is None else out


# ------------------------------------------------------------- conversions


def zcdp_to_approx(rho: float, delta: float) -> float:
    """Epsilon such that rho-zCDP implies (epsilon, delta)-DP."""
    if rho < 0 or not 0 < delta < 1:
        raise InvalidParameterError(f"need rho >= 0 and delta in (0, 1), got rho={rho}, delta={delta}")
    return rho + math.sqrt(rho * math.log(1.0 / delta))


def approx_to_zcdp(epsilon: float, delta: float) -> float:
    """Largest rho with ``zcdp_to_approx(rho, delta) <= epsilon``."""
    if epsilon <= 0 or not 0 < delta < 1:
        raise InvalidParameterError(f"need epsilon > 0 and delta in (0, 1), got {epsilon}, {delta}")
    log_term = math.log(1.0 / delta)
    root = (-math.sqrt(log_term) + math.sqrt(log_term + 4.0 * epsilon)) / 2.0
    return root * root


def gaussian_sigma_for_zcdp(l2_sensitivity: float, rho: float) -> float:
    if l2_sensitivity <= 0 or rho <= 0:
        raise InvalidParameterError("sensitivity and rho must be positive")
    return l2_sensitivity / math.sqrt(2.0 * rho)


def laplace_scale_for_dp(l1_sensitivity: float, epsilon: float) -> float:
    if l1_sensitivity <= 0 or epsilon <= 0:
        raise InvalidParameterError("sensitivity and epsilon must be positive")
    return l1_sensitivity / epsilon


# ------------------------------------------------------------------ budgets


@dataclass(frozen=True)
class PrivacyBudget:
    """A privacy budget of one kind; only the fields for that kind are meaningful."""

    kind: BudgetKind
    epsilon: float = 0.0
    rho: float = 0.0
    delta: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("pure", "zcdp", "approx", "ldp"):
            raise InvalidParameterError(f"unknown budget kind {self.kind!r}")
        for name in ("epsilon", "rho", "delta"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidParameterError(f"{name} must be finite and non-negative, got {value}")
        if self.kind in ("pure", "ldp") and (self.rho or self.delta):
            raise InvalidParameterError(f"{self.kind} budget takes epsilon only")
        if self.kind == "zcdp" and (self.epsilon or self.delta):
            raise InvalidParameterError("zcdp budget takes rho only")
        if self.kind == "approx":
            if self.rho:
                raise InvalidParameterError("approx budget takes epsilon and delta")
            if not 0 < self.delta < 0.5:
                raise InvalidParameterError(f"approx budget needs delta in (0, 1/2), got {self.delta}")

    @classmethod
    def pure(cls, epsilon: float) -> "PrivacyBudget":
        return cls("pure", epsilon=epsilon)

    @classmethod
    def zcdp(cls, rho: float) -> "PrivacyBudget":
        return cls("zcdp", rho=rho)

    @classmethod
    def approx(cls, epsilon: float, delta: float) -> "PrivacyBudget":
        return cls("approx", epsilon=epsilon, delta=delta)

    @classmethod
    def ldp(cls, epsilon: float) -> "PrivacyBudget":
        return cls("ldp", epsilon=epsilon)

    @property
    def accounting_kind(self) -> str:
        return "zcdp" if self.kind == "approx" else self.kind

    @property
    def amount(self) -> float:
        """The additive quantity the ledger tracks (epsilon or rho)."""
        if self.kind in ("pure", "ldp"):
            return self.epsilon
        if self.kind == "zcdp":
            return self.rho
        return approx_to_zcdp(self.epsilon, self.delta) if self.epsilon > 0 else 0.0

    def as_mechanism_budget(self) -> "PrivacyBudget":
        """Approx budgets become the equivalent zCDP budget; others pass through."""
        if self.kind == "approx":
            return PrivacyBudget.zcdp(self.amount)
        return self

    def scaled(self, fraction: float) -> "PrivacyBudget":
        if fraction < 0:
            raise InvalidParameterError("fraction must be non-negative")
        b = self.as_mechanism_budget()
        if b.kind == "zcdp":
            return replace(b, rho=b.rho * fraction)
        return replace(b, epsilon=b.epsilon * fraction)

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind in ("pure", "ldp", "approx"):
            out["epsilon"] = self.epsilon
        if self.kind == "approx":
            out["delta"] = self.delta
            out["rho_equivalent"] = self.amount
        if self.kind == "zcdp":
            out["rho"] = self.rho
        return out


@dataclass
class BudgetLedger:
    """Running total of privacy spent against a fixed budget.

    ``spend`` is atomic: an overspend raises :class:`BudgetExhaustedError`
    and leaves the ledger untouched.
    """

    total: PrivacyBudget
    consumed: float = 0.0
    history: list[tuple[str, float]] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def kind(self) -> str:
        return self.total.accounting_kind

    @property
    def remaining(self) -> float:
        return self.total.amount - self.consumed

    def spend(self, amount: PrivacyBudget | float, label: str = "") -> None:
        if isinstance(amount, PrivacyBudget):
            if amount.accounting_kind != self.kind:
                raise InvalidInputError(f"cannot spend a {amount.kind} budget from a {self.total.kind} ledger")
            value = amount.amount
        else:
            value = float(amount)
        if value < 0 or not math.isfinite(value):
            raise InvalidParameterError(f"spend must be finite and non-negative, got {value}")
        with self._lock:
            if self.consumed + value > self.total.amount + LEDGER_TOLERANCE:
                raise BudgetExhaustedError(
                    f"spending {value:g} ({label or 'unlabelled'}) exceeds remaining {self.remaining:g}"
                )
            self.consumed += value
            self.history.append((label, value))

    def audit(self) -> dict:
        with self._lock:
            return {
                "declared": self.total.amount,
                "consumed": self.consumed,
                "kind": self.kind,
                "spends": [{"label": lab, "amount": amt} for lab, amt in self.history],
                "exact": abs(self.consumed - self.total.amount) <= LEDGER_TOLERANCE,
            }


def ledger_spend(ledger: BudgetLedger, amount: PrivacyBudget | float, label: str = "") -> None:
    ledger.spend(amount, label)


def charge(ledger: BudgetLedger | None, budget: PrivacyBudget, label: str) -> None:
    """Spend ``budget`` from ``ledger`` if one is supplied."""
    if ledger is not None:
        ledger.spend(budget, label)


# ------------------------------------------------------------------ clipping


def clip_matrix(w: np.ndarray) -> np.ndarray:
    """l1 projection onto matrices with entries in [0, 1] and ``w_uv + w_vu = 1``.

    Each unordered pair is handled on its own. The objective
    ``|a - w_uv| + |(1 - a) - w_vu|`` is minimized on the segment between
    ``w_uv`` and ``1 - w_vu``; we return the midpoint of that segment after
    clamping both ends to [0, 1]. Pairs that are already feasible (to 1e-12)
    are returned unchanged. The diagonal is set to 0.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise InvalidInputError("clip_matrix expects a square matrix")
    iu = np.triu_indices(w.shape[0], k=1)
    a = w[iu]
    b = w[(iu[1], iu[0])]
    c = 1.0 - b
    lo = np.clip(np.minimum(a, c), 0.0, 1.0)
    hi = np.clip(np.maximum(a, c), 0.0, 1.0)
    feasible = (a >= 0) & (a <= 1) & (b >= 0) & (b <= 1) & (np.abs(a + b - 1.0) <= FEASIBLE_TOLERANCE)
    upper = np.where(feasible, a, (lo + hi) / 2.0)
    out = np.zeros_like(w)
    out[iu] = upper
    out[(iu[1], iu[0])] = np.where(feasible, b, 1.0 - upper)
    return out
