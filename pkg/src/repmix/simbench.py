"""Simulated scenarios, the replication runner and the design-geometry report."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import METHODS, SidConfig, run_method
from .core import ConfigError, Dataset, PriorConfig, build_dataset
from .metrics import evaluate, relabel_draws
from .repulsion import RepulsionKernel, pair_distance
from .sampler import ChainConfig

SCHEMA_VERSION = 1
SCENARIOS = ("toy", "s1", "s2", "s3")
METRIC_NAMES = ("ari", "rmse", "k_hat", "purity")
MAX_FAILURE_SHARE = 0.10

TOY_B = np.array([[-5.0, 2.5], [0.0, 1.0], [-1.0, 1.5]])


def _corr_cov(scales, rho):
    s = np.asarray(scales, dtype=float)
    idx = np.arange(s.size)
    return np.outer(s, s) * rho ** np.abs(idx[:, None] - idx[None, :])


@dataclass(frozen=True)
class ScenarioSpec:
    """A simulation design: which scenario, how many points per cluster, which seed.

    ``toy`` is a three-line problem in one covariate with an intercept
    (``x ~ U(0, 10)``); ``s1``-``s3`` have four clusters and four correlated
    Gaussian covariates with mean one.
    """

    id: str
    n_per: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.id not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.id!r}; expected one of {SCENARIOS}")
        if int(self.n_per) != self.n_per or self.n_per < 1:
            raise ConfigError("n_per must be a positive integer")

    @property
    def coefficients(self) -> np.ndarray:
        if self.id == "toy":
            return TOY_B.copy()
        if self.id == "s1":
            return np.eye(4)
        if self.id == "s2":
            return np.diag([1.0, 1.0, 1.0, 0.01])
        return np.array([[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 0.01], [1, 0, 0, 0.01]], dtype=float)

    @property
    def covariance(self) -> np.ndarray | None:
        if self.id == "toy":
            return None
        if self.id == "s1":
            return np.diag([100.0] * 4)
        return _corr_cov([10, 10, 10, 100], 0.5)

    @property
    def k_true(self) -> int:
        return self.coefficients.shape[0]

    @property
    def n(self) -> int:
        return self.k_true * self.n_per

    def to_dict(self) -> dict:
        return {"id": self.id, "n_per": self.n_per, "seed": self.seed}


def toy_spec(seed: int = 0) -> ScenarioSpec:
    return ScenarioSpec("toy", 1000, seed)


def gen_scenario(spec: ScenarioSpec) -> tuple[Dataset, np.ndarray]:
    """Simulate one dataset with equal cluster sizes and unit noise.

    Rows are ordered by true cluster. Returns the dataset and the labels.
    """
    rng = np.random.default_rng(spec.seed)
    B = spec.coefficients
    z = np.repeat(np.arange(spec.k_true), spec.n_per)
    n = spec.n
    if spec.id == "toy":
        x = rng.uniform(0.0, 10.0, n)
        X = np.column_stack([np.ones(n), x])
    else:
        L = np.linalg.cholesky(spec.covariance)
        X = 1.0 + rng.standard_normal((n, L.shape[0])) @ L.T
    y = np.einsum("ij,ij->i", X, B[z]) + rng.standard_normal(n)
    return build_dataset(X, y), z


def substream_seed(*parts) -> int:
    """Stable 63-bit seed from a tuple of labels (independent of Python's hash salt)."""
    digest = hashlib.sha256(json.dumps([str(p) for p in parts]).encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass
class BenchResult:
    """Aggregated cells plus the per-replicate rows they came from."""

    rows: list = field(default_factory=list)
    replicates: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def invalid_cells(self) -> list:
        return [r for r in self.rows if not r["valid"]]

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "cells": self.rows,
            "replicates": self.replicates,
        }

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "results.csv"
        cols = ["Scenario", "n", "Method"]
        for m in METRIC_NAMES:
            label = {"ari": "ARI", "rmse": "RMSE", "k_hat": "K_hat", "purity": "Purity"}[m]
            cols += [label, f"{label}_se"]
        cols += ["reps", "failures", "valid"]
        with csv_path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in self.rows:
                line = [r["scenario"], r["n"], r["method"]]
                for m in METRIC_NAMES:
                    line += [_fmt(r["mean"][m]), _fmt(r["se"][m])]
                line += [r["reps"], r["failures"], int(r["valid"])]
                w.writerow(line)
        json_path = out / "results.json"
        json_path.write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n")
        return csv_path, json_path


def _fmt(v):
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def _nan_to_none(v):
    return None if isinstance(v, float) and math.isnan(v) else v


def _replicate(task):
    spec, method, rep, chain_seed, chain, prior, sid, rmse = task
    row = {"scenario": spec.id, "n": spec.n, "method": method, "rep": rep,
           "data_seed": spec.seed, "chain_seed": chain_seed}
    try:
        dataset, truth = gen_scenario(spec)
        chain_r = ChainConfig(**{**chain.to_dict(), "seed": chain_seed})
        draws = run_method(method, dataset, prior, chain_r, sid=sid)
        thr = sid.eff_threshold if sid is not None else 1e-3
        draws = relabel_draws(draws)
        rep_ = evaluate(dataset, draws, truth, rmse=rmse, eff_threshold=thr, relabeled=True)
        other = "draws" if rmse == "ols" else "ols"
        alt = evaluate(dataset, draws, truth, rmse=other, eff_threshold=thr, relabeled=True).rmse
        row.update(ok=True, ari=rep_.ari, rmse=rep_.rmse, k_hat=rep_.k_hat,
                   k_mode=rep_.k_mode, purity=rep_.purity)
        row[f"rmse_{rmse}"], row[f"rmse_{other}"] = rep_.rmse, alt
    except Exception as exc:  # noqa: BLE001 - a failed replicate is recorded, not fatal
        row.update(ok=False, error=f"{type(exc).__name__}: {exc}")
    return row


def _aggregate(rows, reps):
    ok = [r for r in rows if r["ok"]]
    failures = len(rows) - len(ok)
    mean, se = {}, {}
    for m in METRIC_NAMES:
        vals = np.array([r[m] for r in ok], dtype=float)
        mean[m] = float(vals.mean()) if vals.size else math.nan
        se[m] = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.nan
    return {
        "scenario": rows[0]["scenario"],
        "n": rows[0]["n"],
        "method": rows[0]["method"],
        "mean": {k: _nan_to_none(v) for k, v in mean.items()},
        "se": {k: _nan_to_none(v) for k, v in se.items()},
        "reps": reps,
        "failures": failures,
        "valid": failures <= MAX_FAILURE_SHARE * reps,
    }


def run_benchmark(scenarios, methods, reps: int, base_seed: int, chain: ChainConfig,
                  prior: PriorConfig, jobs: int = 1, sid: SidConfig | None = None,
                  rmse: str = "ols", same_seed: bool = False) -> BenchResult:
    """Fit every method to ``reps`` simulated datasets per scenario and aggregate.

    ``scenarios`` holds :class:`ScenarioSpec` objects (their ``seed`` is
    ignored) or ``(id, n_per)`` pairs. Replicate ``r`` of a scenario uses the
    data seed ``substream_seed(base_seed, id, n_per, r)``, shared by all
    methods, and the chain seed ``substream_seed(base_seed, id, n_per,
    method, r)``. With ``same_seed`` every replicate reuses the seeds of
    replicate 0. Results do not depend on ``jobs``.
    """
    if reps < 2:
        raise ConfigError("reps must be at least 2")
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
    specs = [s if isinstance(s, ScenarioSpec) else ScenarioSpec(s[0], int(s[1])) for s in scenarios]
    tasks = []
    for spec in specs:
        for method in methods:
            for r in range(reps):
                r_seed = 0 if same_seed else r
                data_seed = substream_seed(base_seed, spec.id, spec.n_per, r_seed)
                chain_seed = substream_seed(base_seed, spec.id, spec.n_per, method, r_seed)
                tasks.append((ScenarioSpec(spec.id, spec.n_per, data_seed), method, r,
                              chain_seed, chain, prior, sid, rmse))
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_replicate, tasks))
    else:
        results = [_replicate(t) for t in tasks]

    cells = []
    for i in range(0, len(results), reps):
        cells.append(_aggregate(results[i:i + reps], reps))
    config = {
        "scenarios": [[s.id, s.n_per] for s in specs],
        "methods": methods,
        "reps": reps,
        "base_seed": base_seed,
        "chain": chain.to_dict(),
        "prior": prior.to_dict(),
        "sid": None if sid is None else sid.to_dict(),
        "rmse": rmse,
        "same_seed": same_seed,
    }
    return BenchResult(cells, results, config)


def _discordant_pairs(a, b) -> int:
    a = np.asarray(a)
    b = np.asarray(b)
    i, j = np.triu_indices(a.size, 1)
    return int(np.count_nonzero(np.sign(a[i] - a[j]) * np.sign(b[i] - b[j]) < 0))


def geometry_report(dataset_or_gram, betas, g: float) -> dict:
    """Compare pairwise distances between coefficient vectors in two geometries.

    Returns the squared Euclidean distances in coefficient space, the
    predictive distances ``(1/g) (b - b')^T X^T X (b - b')``, both listed
    over pairs ``(i, j)``, ``i < j``, in lexicographic order, and the number
    of pairs of pairs whose order is reversed between the two lists.
    """
    betas = [np.asarray(b, dtype=float) for b in betas]
    if len(betas) < 2:
        raise ConfigError("geometry_report needs at least two vectors")
    kernel = RepulsionKernel.mahalanobis(dataset_or_gram, g)
    euclid = RepulsionKernel.euclidean()
    pairs = [(i, j) for i in range(len(betas)) for j in range(i + 1, len(betas))]
    beta_d = [pair_distance(betas[i], betas[j], euclid) for i, j in pairs]
    mean_d = [pair_distance(betas[i], betas[j], kernel) for i, j in pairs]
    return {
        "schema_version": SCHEMA_VERSION,
        "pairs": [list(p) for p in pairs],
        "beta_space_dists": beta_d,
        "mean_space_dists": mean_d,
        "ordering_flips": _discordant_pairs(beta_d, mean_d),
    }
