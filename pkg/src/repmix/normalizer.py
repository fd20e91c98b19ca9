"""Monte Carlo normalizing constants of the repulsive prior.

``Z_K`` is the prior expectation of ``h_K`` over ``K`` independent component
draws. ``Z~_K`` replaces the draws of occupied components by draws from
their conditional posteriors. Both are averaged on the log scale with a
max shift, so configurations with tiny ``h`` do not underflow.

Draws are generated in fixed-size chunks, each from its own
``SeedSequence(seed, spawn_key=(K, chunk))`` stream, and reduced in chunk
order. Results do not depend on how many workers evaluate the chunks.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import pairwise
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .core import (
    ConfigError,
    Dataset,
    EstimateUnderflowError,
    MixtureState,
    PriorConfig,
)
from .distributions import CoefficientPrior, truncated_invgamma
from .repulsion import RepulsionKernel, pairwise_log_h

CHUNK = 1000
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ZkEntry:
    log_estimate: float
    mc_std_error: float
    n_samples: int


@dataclass
class ZkTable:
    """``log Z_K`` estimates for ``K = 2..k_max``; ``Z_1 = 1`` is implicit."""

    entries: dict = field(default_factory=dict)
    seed: int = 0
    k_max: int = 1
    key: str = ""

    def log_z(self, K: int) -> float:
        if K == 1:
            return 0.0
        try:
            return self.entries[K].log_estimate
        except KeyError:
            raise ConfigError(f"Z_K table has no entry for K={K} (k_max={self.k_max})") from None

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "key": self.key,
            "seed": self.seed,
            "k_max": self.k_max,
            "entries": {
                str(K): {
                    "log_estimate": e.log_estimate,
                    "mc_std_error": e.mc_std_error,
                    "n_samples": e.n_samples,
                }
                for K, e in sorted(self.entries.items())
            },
        }

    @classmethod
    def from_json(cls, d: dict) -> ZkTable:
        entries = {int(K): ZkEntry(**e) for K, e in d["entries"].items()}
        return cls(entries=entries, seed=d["seed"], k_max=d["k_max"], key=d.get("key", ""))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> ZkTable:
        return cls.from_json(json.loads(Path(path).read_text()))


def _default_coef_prior(dataset, prior, coef_prior):
    if coef_prior is None:
        return CoefficientPrior.g_prior(dataset, prior.resolve_g(dataset.n))
    return coef_prior


def _prior_sigma2(rng, prior: PriorConfig, size):
    draws, _ = truncated_invgamma(rng, prior.a0, prior.b0, prior.sigma2_lo, prior.sigma2_hi, size=size)
    return draws


def _zk_chunk(K, m, seed, chunk, prior, kernel, coef_prior):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(K, chunk))))
    sigma2 = _prior_sigma2(rng, prior, (m, K))
    betas = coef_prior.sample(rng, sigma2.ravel()).reshape(m, K, -1)
    return pairwise_log_h(kernel.coords(betas), kernel.g0)


def _log_mean(logh: np.ndarray):
    """``log mean(h)`` and its delta-method standard error."""
    S = logh.shape[0]
    n_zero = int(np.count_nonzero(np.isneginf(logh)))
    if n_zero == S:
        raise EstimateUnderflowError(n_zero, S)
    top = logh.max()
    scaled = np.exp(logh - top)
    mean = scaled.mean()
    log_est = float(logsumexp(logh) - math.log(S))
    se = float(scaled.std(ddof=1) / (math.sqrt(S) * mean)) if S > 1 else 0.0
    return min(log_est, 0.0), se


def estimate_zk(
    K: int,
    dataset: Dataset,
    prior: PriorConfig,
    kernel: RepulsionKernel,
    seed: int,
    coef_prior: CoefficientPrior | None = None,
    jobs: int = 1,
) -> ZkEntry:
    """Monte Carlo estimate of ``log Z_K`` under the joint (beta, sigma^2) prior."""
    if K < 1:
        raise ConfigError("K must be >= 1")
    S = prior.zk_samples
    if K == 1 or not kernel.active:
        return ZkEntry(0.0, 0.0, S)
    coef_prior = _default_coef_prior(dataset, prior, coef_prior)
    sizes = [min(CHUNK, S - start) for start in range(0, S, CHUNK)]
    args = [(K, m, seed, j, prior, kernel, coef_prior) for j, m in enumerate(sizes)]
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(lambda a: _zk_chunk(*a), args))
    else:
        parts = [_zk_chunk(*a) for a in args]
    log_est, se = _log_mean(np.concatenate(parts))
    return ZkEntry(log_est, se, S)


def zk_cache_key(dataset, prior, kernel, seed, coef_prior=None) -> str:
    coef_prior = _default_coef_prior(dataset, prior, coef_prior)
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(dataset.gram).tobytes())
    payload = {
        "prior": prior.to_dict(),
        "kernel": kernel.describe(),
        "coef_prior": coef_prior.describe(),
        "seed": seed,
    }
    h.update(json.dumps(payload, sort_keys=True, default=str).encode())
    return h.hexdigest()[:32]


def build_zk_table(
    dataset: Dataset,
    prior: PriorConfig,
    kernel: RepulsionKernel,
    seed: int,
    coef_prior: CoefficientPrior | None = None,
    k_max: int | None = None,
    jobs: int = 1,
) -> ZkTable:
    k_max = prior.k_max if k_max is None else k_max
    table = ZkTable(seed=seed, k_max=k_max, key=zk_cache_key(dataset, prior, kernel, seed, coef_prior))
    for K in range(2, k_max + 1):
        table.entries[K] = estimate_zk(K, dataset, prior, kernel, seed, coef_prior, jobs=jobs)
    return table


def load_or_build_zk(cache_dir, dataset, prior, kernel, seed, coef_prior=None, jobs=1) -> ZkTable:
    """Reuse a persisted table keyed by the content hash of its inputs."""
    key = zk_cache_key(dataset, prior, kernel, seed, coef_prior)
    path = Path(cache_dir) / f"zk-{key}.json"
    if path.exists():
        table = ZkTable.load(path)
        if table.key == key and table.k_max >= prior.k_max:
            return table
    table = build_zk_table(dataset, prior, kernel, seed, coef_prior, jobs=jobs)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.save(path)
    return table


def _posterior_draws(rng, S, Xc, yc, beta_now, prior, coef_prior):
    """``S`` draws of ``(beta, sigma^2)`` from one Gibbs scan of a cluster's conditionals."""
    n_c = Xc.shape[0]
    rss = float(np.sum((yc - Xc @ beta_now) ** 2))
    sigma2, _ = truncated_invgamma(
        rng, prior.a0 + 0.5 * n_c, prior.b0 + 0.5 * rss, prior.sigma2_lo, prior.sigma2_hi, size=S
    )
    xtx = Xc.T @ Xc
    xty = Xc.T @ yc
    p = xtx.shape[0]
    z = rng.standard_normal((S, p))
    if coef_prior.kind == "g":
        # V = sigma^2 A^{-1}, mean = A^{-1} X_c^T y_c with A = X_c^T X_c + X^T X / g
        A = xtx + coef_prior.gram / coef_prior.g
        L = np.linalg.cholesky(A)
        mean = np.linalg.solve(A, xty)
        noise = np.linalg.solve(L.T, z.T).T
        return mean + noise * np.sqrt(sigma2)[:, None], sigma2
    # X_c^T X_c = Q diag(lam) Q^T diagonalizes every draw's precision at once
    lam, Q = np.linalg.eigh(xtx)
    lam = np.clip(lam, 0.0, None)
    var = 1.0 / (lam[None] / sigma2[:, None] + 1.0 / coef_prior.tau2)
    mean_rot = var * (Q.T @ xty)[None] / sigma2[:, None]
    return (mean_rot + np.sqrt(var) * z) @ Q.T, sigma2


def ztilde_log_estimates(
    state: MixtureState,
    dataset: Dataset,
    prior: PriorConfig,
    kernel: RepulsionKernel,
    Ks,
    rng,
    coef_prior: CoefficientPrior | None = None,
) -> dict:
    """``log Z~_K`` for several candidate ``K`` using one shared set of draws.

    The occupied-cluster draws and the first ``K - l`` empty-slot draws are
    common to all candidates, so the estimates are positively correlated and
    their ratios are less noisy than independent estimates.
    """
    Ks = sorted(int(K) for K in Ks)
    occ = sorted(state.occupied)
    ell = len(occ)
    if Ks and Ks[0] < ell:
        raise ConfigError(f"candidate K={Ks[0]} below occupied count {ell}")
    if not kernel.active or not Ks or Ks[-1] < 2:
        return {K: 0.0 for K in Ks}
    coef_prior = _default_coef_prior(dataset, prior, coef_prior)
    S = prior.ztilde_samples
    extra = Ks[-1] - ell
    parts = []
    for c in occ:
        rows = state.z == c
        b, _ = _posterior_draws(
            rng, S, dataset.X[rows], dataset.y[rows], state.beta[c], prior, coef_prior
        )
        parts.append(b)
    if extra:
        s2 = _prior_sigma2(rng, prior, (S, extra))
        parts.extend(np.moveaxis(coef_prior.sample(rng, s2.ravel()).reshape(S, extra, -1), 1, 0))
    coords = kernel.coords(np.stack(parts, axis=1))
    out = {}
    for K in Ks:
        if K < 2:
            out[K] = 0.0
            continue
        out[K], _ = _log_mean(pairwise_log_h(coords[:, :K], kernel.g0))
    return out


def estimate_ztilde(state, dataset, prior, kernel, K, seed, coef_prior=None) -> float:
    """Monte Carlo ``log Z~_K`` for the occupied clusters of ``state`` plus ``K - l`` empty slots."""
    rng = np.random.default_rng(seed)
    return ztilde_log_estimates(state, dataset, prior, kernel, [K], rng, coef_prior)[K]


def theorem1_diagnostic(table: ZkTable) -> dict:
    """Check ``0 <= -log Z_K <= c1 K`` on an estimated table.

    Returns the largest ``-log Z_K / K`` as ``c1_hat``, the full ratio
    sequence, whether every ``-log Z_K`` is nonnegative within two standard
    errors, and any ``K`` where the estimates increase by more than two
    standard errors (the true sequence is non-increasing).
    """
    Ks = sorted(K for K in table.entries if K >= 2)
    ratios = [-table.entries[K].log_estimate / K for K in Ks]
    nonneg = all(-table.entries[K].log_estimate >= -2 * table.entries[K].mc_std_error for K in Ks)
    flags = []
    for a, b in pairwise(Ks):
        ea, eb = table.entries[a], table.entries[b]
        if eb.log_estimate - ea.log_estimate > 2 * math.hypot(ea.mc_std_error, eb.mc_std_error):
            flags.append(b)
    return {
        "c1_hat": max(ratios) if ratios else 0.0,
        "per_k_ratios": dict(zip(Ks, ratios)),
        "nonnegative": nonneg,
        "monotonicity_flags": flags,
    }
