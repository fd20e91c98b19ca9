"""Relabeling of posterior draws and partition / fit metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import ConfigError, Dataset, DimensionMismatchError, Draws, MixtureState

# candidate references and comparison draws used to pick the relabeling reference
N_REF_CANDIDATES = 100
N_REF_COMPARE = 200


def _contingency(a, b):
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    ka, kb = ia.max() + 1, ib.max() + 1
    return np.bincount(ia * kb + ib, minlength=ka * kb).reshape(ka, kb)


def _pairs(x):
    x = np.asarray(x, dtype=np.int64)
    return int(np.sum(x * (x - 1) // 2))


def _check_lengths(a, b):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise DimensionMismatchError(f"partitions have lengths {a.size} and {b.size}")
    if a.size == 0:
        raise DimensionMismatchError("partitions are empty")
    return a, b


def ari(a, b) -> float:
    """Adjusted Rand index of two labelings of the same items.

    Pair counts are kept as integers and combined in a single division, so
    the result is the correctly rounded value of the exact ratio. When the
    index has no room to vary (both labelings a single cluster, or both all
    singletons) the labelings agree and the result is 1.
    """
    a, b = _check_lengths(a, b)
    table = _contingency(a, b)
    index = _pairs(table)
    ra = _pairs(table.sum(axis=1))
    rb = _pairs(table.sum(axis=0))
    total = _pairs([a.size])
    num = 2 * (total * index - ra * rb)
    den = total * (ra + rb) - 2 * ra * rb
    if den == 0:
        return 1.0
    return num / den


def rand_agreement(a, b) -> float:
    """Fraction of item pairs on which two labelings agree (unadjusted Rand index)."""
    a, b = _check_lengths(a, b)
    total = _pairs([a.size])
    if total == 0:
        return 1.0
    table = _contingency(a, b)
    index = _pairs(table)
    disagree = _pairs(table.sum(axis=1)) + _pairs(table.sum(axis=0)) - 2 * index
    return (total - disagree) / total


def purity(pred, truth) -> float:
    """Share of items that fall in the majority true class of their predicted cluster."""
    pred, truth = _check_lengths(pred, truth)
    return int(_contingency(pred, truth).max(axis=1).sum()) / pred.size


def _spread(m, count):
    if m <= count:
        return np.arange(m)
    return np.unique(np.linspace(0, m - 1, count).round().astype(int))


def reference_index(draws: Draws) -> int:
    """Index of the draw whose partition agrees best, on average, with the others.

    For long chains the search is restricted to evenly spaced candidates,
    each scored against an evenly spaced subset of draws.
    """
    m = len(draws.states)
    if m == 0:
        raise ConfigError("no draws to relabel")
    cand = _spread(m, N_REF_CANDIDATES)
    comp = _spread(m, N_REF_COMPARE)
    zs = [draws.states[i].z for i in range(m)]
    scores = [np.mean([rand_agreement(zs[c], zs[j]) for j in comp]) for c in cand]
    return int(cand[int(np.argmax(scores))])


def _permute_state(state: MixtureState, mapping: dict) -> MixtureState:
    size = max(mapping.values()) + 1
    p = state.beta.shape[1]
    beta = np.zeros((size, p))
    sigma2 = np.ones(size)
    alive = np.zeros(size, dtype=bool)
    weights = None if state.weights is None else np.zeros(size)
    for old, new in mapping.items():
        beta[new] = state.beta[old]
        sigma2[new] = state.sigma2[old]
        alive[new] = state.alive[old]
        if weights is not None:
            weights[new] = state.weights[old]
    lut = np.full(len(state.alive), -1, dtype=np.int64)
    for old, new in mapping.items():
        lut[old] = new
    z = lut[state.z].astype(state.z.dtype)
    return MixtureState(z, beta, sigma2, alive, weights)


def relabel_draws(draws: Draws) -> Draws:
    """Permute each draw's labels to agree with a reference partition.

    The reference is the draw from :func:`reference_index`. Each draw's
    occupied labels are matched to the reference clusters by maximizing the
    total overlap (Hungarian algorithm on the contingency table). Matched
    labels take the reference id; the rest, including empty components, get
    fresh ids above the reference's largest id in their original order.
    """
    ref_idx = reference_index(draws)
    ref = draws.states[ref_idx]
    ref_labels = np.unique(ref.z)
    fresh_start = len(ref.alive)
    out = []
    for s in draws.states:
        own = np.unique(s.z)
        table = np.zeros((own.size, ref_labels.size), dtype=np.int64)
        np.add.at(table, (np.searchsorted(own, s.z), np.searchsorted(ref_labels, ref.z)), 1)
        rows, cols = linear_sum_assignment(table, maximize=True)
        mapping = {int(own[r]): int(ref_labels[c]) for r, c in zip(rows, cols)}
        nxt = fresh_start
        for c in np.flatnonzero(s.alive):
            if int(c) not in mapping:
                mapping[int(c)] = nxt
                nxt += 1
        out.append(_permute_state(s, mapping))
    meta = dict(draws.meta)
    meta["relabel_reference"] = ref_idx
    return Draws(out, meta)


def point_assignments(draws: Draws) -> np.ndarray:
    """Most frequent label of each observation across draws; ties go to the smaller id."""
    if not draws.states:
        raise ConfigError("no draws")
    zs = np.stack([s.z for s in draws.states]).astype(np.int64)
    n = zs.shape[1]
    top = int(zs.max()) + 1
    counts = np.zeros((n, top), dtype=np.int64)
    np.add.at(counts, (np.broadcast_to(np.arange(n), zs.shape), zs), 1)
    return np.argmax(counts, axis=1)


def _cluster_fits(dataset: Dataset, z_hat) -> dict:
    X, y = dataset.X, dataset.y
    p = dataset.p
    ridge = 1e-6 * np.trace(dataset.gram) / p
    fits = {}
    for c in np.unique(z_hat):
        rows = z_hat == c
        Xc, yc = X[rows], y[rows]
        if rows.sum() >= p + 1:
            fits[c] = np.linalg.lstsq(Xc, yc, rcond=None)[0]
        else:
            fits[c] = np.linalg.solve(Xc.T @ Xc + ridge * np.eye(p), Xc.T @ yc)
    return fits


def rmse_posthoc(dataset: Dataset, z_hat) -> float:
    """RMSE after a least-squares refit inside each estimated cluster.

    Clusters with fewer than ``p + 1`` members get a ridge fit with penalty
    ``1e-6 trace(X^T X) / p``.
    """
    z_hat = np.asarray(z_hat)
    if z_hat.shape != (dataset.n,):
        raise DimensionMismatchError(f"z_hat has shape {z_hat.shape}, expected ({dataset.n},)")
    fits = _cluster_fits(dataset, z_hat)
    B = np.stack([fits[c] for c in z_hat])
    resid = dataset.y - np.einsum("ij,ij->i", dataset.X, B)
    return float(np.sqrt(np.mean(resid**2)))


def rmse_from_draws(dataset: Dataset, draws: Draws, z_hat) -> float:
    """RMSE using each cluster's posterior-mean coefficients instead of a refit.

    ``draws`` must be relabeled. Clusters never alive in any draw fall back
    to the refit.
    """
    z_hat = np.asarray(z_hat)
    p = dataset.p
    sums, counts = {}, {}
    for s in draws.states:
        for c in np.flatnonzero(s.alive):
            sums[c] = sums.get(c, np.zeros(p)) + s.beta[c]
            counts[c] = counts.get(c, 0) + 1
    refit = None
    B = np.empty((dataset.n, p))
    for c in np.unique(z_hat):
        if c in counts:
            B[z_hat == c] = sums[c] / counts[c]
        else:
            if refit is None:
                refit = _cluster_fits(dataset, z_hat)
            B[z_hat == c] = refit[c]
    resid = dataset.y - np.einsum("ij,ij->i", dataset.X, B)
    return float(np.sqrt(np.mean(resid**2)))


def cluster_counts(draws: Draws, model_tag: str | None = None, eff_threshold: float = 1e-3) -> np.ndarray:
    """Per-draw cluster count: weights above ``eff_threshold`` for SID, occupied components otherwise."""
    tag = model_tag if model_tag is not None else draws.meta.get("model", "")
    if str(tag).startswith("sid"):
        return np.array([int(np.count_nonzero(s.weights > eff_threshold)) for s in draws.states])
    return draws.occupied_counts()


def k_hat(draws: Draws, model_tag: str | None = None, eff_threshold: float = 1e-3) -> dict:
    """Posterior mean and mode of the cluster count (ties in the mode go to the smaller count)."""
    ks = cluster_counts(draws, model_tag, eff_threshold)
    return {"mean": float(ks.mean()), "mode": int(np.bincount(ks).argmax())}


CSV_FIELDS = ("scenario", "n", "method", "seed", "ari", "rmse", "k_hat_mean", "k_hat_mode", "purity")


@dataclass(frozen=True)
class EvalReport:
    """Summary of one fitted chain. ``ari`` and ``purity`` are None without true labels."""

    ari: float | None
    purity: float | None
    k_hat: float
    k_mode: int
    rmse: float
    n: int

    def to_row(self, scenario="", method="", seed="") -> dict:
        return {
            "scenario": scenario,
            "n": self.n,
            "method": method,
            "seed": seed,
            "ari": self.ari,
            "rmse": self.rmse,
            "k_hat_mean": self.k_hat,
            "k_hat_mode": self.k_mode,
            "purity": self.purity,
        }

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(dataset: Dataset, draws: Draws, truth=None, rmse: str = "ols",
             eff_threshold: float = 1e-3, relabeled: bool = False) -> EvalReport:
    """Relabel, take point assignments and compute the report.

    ``rmse`` is ``"ols"`` (refit within clusters) or ``"draws"`` (posterior
    mean coefficients).
    """
    if rmse not in ("ols", "draws"):
        raise ConfigError(f"unknown rmse variant {rmse!r}")
    rel = draws if relabeled else relabel_draws(draws)
    z_hat = point_assignments(rel)
    kh = k_hat(rel, eff_threshold=eff_threshold)
    err = rmse_posthoc(dataset, z_hat) if rmse == "ols" else rmse_from_draws(dataset, rel, z_hat)
    a = pur = None
    if truth is not None:
        a, pur = ari(z_hat, truth), purity(z_hat, truth)
    return EvalReport(a, pur, kh["mean"], kh["mode"], err, dataset.n)
