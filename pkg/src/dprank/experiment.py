"""Experiment sweeps over synthetic datasets.

A spec is read from an INI file with one ``[experiment]`` section::

    [experiment]
    generator = mallows        ; mallows | uniform | unanimous | two-block
    phi = 0.5
    m = 5, 6
    n = 1000, 2000
    model = pure               ; any of pure, zcdp, approx, ldp (comma list)
    epsilon = 1.0              ; list; used by pure, approx, ldp
    rho = 0.5                  ; list; used by zcdp
    delta = 1e-6               ; used by approx
    objective = kemeny-ptas    ; any of footrule, kemeny2, kemeny-ptas (comma list)
    regime = auto
    trials = 20
    seed = 0
    output = results
    workers = 1
    noise = on                 ; off runs every mechanism with noise disabled

Outputs in ``output``: ``trials.csv`` (one row per cell and trial),
``summary.csv`` (per-cell means and standard deviations), ``timings.csv``
(wall-clock seconds, kept apart so the other CSVs are reproducible) and
``manifest.json``.
"""

from __future__ import annotations

import configparser
import csv
import itertools
import json
import logging
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import DPRankError, InvalidParameterError
from .generators import GENERATORS, generate
from .pipeline import objective_metric, run_aggregation
from .privacy import PrivacyBudget, noise_disabled
from .rankings import BRUTE_FORCE_MAX_M, avg_distance, brute_force_optimal

logger = logging.getLogger(__name__)

OPT_MAX_M = 9

TRIAL_COLUMNS = ["cell", "trial", "generator", "m", "n", "model", "objective", "epsilon", "rho", "delta", "seed",
                 "status", "objective_value", "opt", "excess_over_opt", "noiseless_value", "excess_over_noiseless",
                 "fallback_used", "ledger_exact", "regime"]
SUMMARY_COLUMNS = ["cell", "generator", "m", "n", "model", "objective", "epsilon", "rho", "delta", "trials", "failed",
                   "objective_mean", "objective_std", "excess_over_opt_mean", "excess_over_opt_std",
                   "excess_over_noiseless_mean", "excess_over_noiseless_std", "fallback_rate"]


@dataclass(frozen=True)
class Cell:
    m: int
    n: int
    model: str
    objective: str
    epsilon: float
    rho: float
    delta: float

    def budget(self) -> PrivacyBudget:
        if self.model == "pure":
            return PrivacyBudget.pure(self.epsilon)
        if self.model == "ldp":
            return PrivacyBudget.ldp(self.epsilon)
        if self.model == "zcdp":
            return PrivacyBudget.zcdp(self.rho)
        return PrivacyBudget.approx(self.epsilon, self.delta)


@dataclass
class ExperimentSpec:
    generator: str = "mallows"
    phi: float = 0.5
    m: list[int] = field(default_factory=lambda: [5])
    n: list[int] = field(default_factory=lambda: [1000])
    model: list[str] = field(default_factory=lambda: ["pure"])
    epsilon: list[float] = field(default_factory=lambda: [1.0])
    rho: list[float] = field(default_factory=lambda: [0.5])
    delta: float = 1e-6
    objective: list[str] = field(default_factory=lambda: ["kemeny-ptas"])
    regime: str = "auto"
    trials: int = 10
    seed: int = 0
    output: str = "results"
    workers: int = 1
    noise: bool = True

    def __post_init__(self) -> None:
        if self.generator not in GENERATORS:
            raise InvalidParameterError(f"unknown generator {self.generator!r}")
        if self.trials < 1:
            raise InvalidParameterError("trials must be >= 1")
        if not (self.m and self.n and self.model and self.objective):
            raise InvalidParameterError("grid must be non-empty")
        for obj in self.objective:
            objective_metric(obj)
        for cell in self.cells():
            cell.budget()

    def cells(self) -> list[Cell]:
        out = []
        for m, n, model, objective in itertools.product(self.m, self.n, self.model, self.objective):
            if model not in ("pure", "zcdp", "approx", "ldp"):
                raise InvalidParameterError(f"unknown model {model!r}")
            if model == "zcdp":
                out.extend(Cell(m, n, model, objective, 0.0, rho, 0.0) for rho in self.rho)
            else:
                delta = self.delta if model == "approx" else 0.0
                out.extend(Cell(m, n, model, objective, eps, 0.0, delta) for eps in self.epsilon)
        return out


def _split(raw: str, cast) -> list:
    return [cast(tok.strip()) for tok in raw.split(",") if tok.strip()]


def load_spec(path: str | Path) -> ExperimentSpec:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not parser.read(path):
        raise FileNotFoundError(path)
    if "experiment" not in parser:
        raise InvalidParameterError(f"{path}: missing [experiment] section")
    sec = parser["experiment"]
    known = {f for f in ExperimentSpec.__dataclass_fields__}
    unknown = set(sec) - known
    if unknown:
        raise InvalidParameterError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs: dict = {}
    lists = {"m": int, "n": int, "model": str, "epsilon": float, "rho": float, "objective": str}
    try:
        for key, cast in lists.items():
            if key in sec:
                kwargs[key] = _split(sec[key], cast)
        for key, cast in (("phi", float), ("delta", float), ("trials", int), ("seed", int), ("workers", int)):
            if key in sec:
                kwargs[key] = cast(sec[key])
        for key in ("generator", "regime", "output"):
            if key in sec:
                kwargs[key] = sec[key].strip()
        if "noise" in sec:
            kwargs["noise"] = sec.getboolean("noise")
    except ValueError as exc:
        raise InvalidParameterError(f"{path}: {exc}") from None
    return ExperimentSpec(**kwargs)


def trial_seed(root: int, cell: int, trial: int) -> int:
    return int(np.random.SeedSequence(root, spawn_key=(cell, trial)).generate_state(1)[0])


def _run_trial(spec: ExperimentSpec, cell_index: int, cell: Cell, trial: int) -> tuple[dict, float]:
    seed = trial_seed(spec.seed, cell_index, trial)
    row = {"cell": cell_index, "trial": trial, "generator": spec.generator, "m": cell.m, "n": cell.n,
           "model": cell.model, "objective": cell.objective, "epsilon": cell.epsilon, "rho": cell.rho,
           "delta": cell.delta, "seed": seed}
    start = time.perf_counter()
    try:
        data = generate(spec.generator, cell.m, cell.n, phi=spec.phi, rng=np.random.default_rng([seed, 0]))
        metric = objective_metric(cell.objective)
        budget = cell.budget()
        if spec.noise:
            result = run_aggregation(data, cell.objective, budget, seed=seed, regime=spec.regime)
        else:
            with noise_disabled(unsafe_for_privacy=True):
                result = run_aggregation(data, cell.objective, budget, seed=seed, regime=spec.regime)
        with noise_disabled(unsafe_for_privacy=True):
            noiseless = run_aggregation(data, cell.objective, budget, seed=seed, regime=spec.regime)
        opt = ""
        if cell.m <= min(OPT_MAX_M, BRUTE_FORCE_MAX_M):
            opt = avg_distance(brute_force_optimal(data, metric), data, metric)
        details = result.details.get("regime_details", {})
        row.update({
            "status": "ok",
            "objective_value": result.objective_value,
            "opt": opt,
            "excess_over_opt": "" if opt == "" else result.objective_value - opt,
            "noiseless_value": noiseless.objective_value,
            "excess_over_noiseless": result.objective_value - noiseless.objective_value,
            "fallback_used": int(bool(details.get("fallback_used", False))),
            "ledger_exact": int(result.ledger.audit()["exact"]),
            "regime": result.details.get("regime", ""),
        })
    except DPRankError as exc:
        row["status"] = f"error: {exc}"
    except ValueError as exc:
        row["status"] = f"error: {exc}"
    return row, time.perf_counter() - start


def _task(args):
    return _run_trial(*args)


def _mean_std(values: list[float]) -> tuple[str | float, str | float]:
    if not values:
        return "", ""
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1)) if len(arr) > 1 else 0.0


def summarize(spec: ExperimentSpec, rows: list[dict]) -> list[dict]:
    out = []
    for cell_index, cell in enumerate(spec.cells()):
        mine = [r for r in rows if r["cell"] == cell_index]
        ok = [r for r in mine if r["status"] == "ok"]
        entry = {"cell": cell_index, "generator": spec.generator, **{k: v for k, v in asdict(cell).items()},
                 "trials": len(mine), "failed": len(mine) - len(ok)}
        for key, col in (("objective", "objective_value"), ("excess_over_opt", "excess_over_opt"),
                         ("excess_over_noiseless", "excess_over_noiseless")):
            entry[f"{key}_mean"], entry[f"{key}_std"] = _mean_std([r[col] for r in ok if r[col] != ""])
        entry["fallback_rate"] = float(np.mean([r["fallback_used"] for r in ok])) if ok else ""
        out.append(entry)
    return out


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in columns})


def run_experiment(spec: ExperimentSpec) -> Path:
    """Run every (cell, trial) and write the reports; returns the output directory."""
    out = Path(spec.output)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(spec, ci, cell, t) for ci, cell in enumerate(spec.cells()) for t in range(spec.trials)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    results.sort(key=lambda rt: (rt[0]["cell"], rt[0]["trial"]))
    rows = [r for r, _ in results]
    for row in rows:
        if row["status"] != "ok":
            logger.warning("cell %s trial %s failed: %s", row["cell"], row["trial"], row["status"])

    _write_csv(out / "trials.csv", TRIAL_COLUMNS, rows)
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summarize(spec, rows))
    _write_csv(out / "timings.csv", ["cell", "trial", "seconds"],
               [{"cell": r["cell"], "trial": r["trial"], "seconds": f"{s:.6f}"} for r, s in results])
    manifest = {
        "spec": asdict(spec),
        "seeds": [{"cell": r["cell"], "trial": r["trial"], "seed": r["seed"]} for r in rows],
        "versions": {"dprank": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return out
