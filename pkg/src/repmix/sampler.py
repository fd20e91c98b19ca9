"""Blocked-collapsed Gibbs sampler for regression mixtures under a repulsive prior.

One iteration runs, in order,

1. collapsed reassignment of every observation (mixture weights integrated
   out; a fresh component is proposed from the repulsion-tilted prior for each
   observation);
2. a draw of the total component count ``K`` given the occupied count, which
   instantiates ``K - l`` empty components from the prior;
3. truncated inverse-gamma variance updates;
4. a joint accept-reject update of all coefficient vectors, whose proposal is
   the product of the conjugate conditionals and whose acceptance probability
   is ``h_K`` of the proposed block.

The same machinery fits the Euclidean-repulsive and non-repulsive baselines by
swapping the kernel and the coefficient prior.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaln, logsumexp

from . import _kernels
from .core import (
    ComponentParams,
    ConfigError,
    ConvergenceError,
    Dataset,
    Draws,
    EstimateUnderflowError,
    KPrior,
    MixtureState,
    PriorConfig,
)
from .distributions import CoefficientPrior, truncated_invgamma, truncated_invgamma_mass
from .normalizer import ZkTable, ztilde_log_estimates
from .repulsion import RepulsionKernel, pairwise_log_h

MAX_SERIES_TERMS = 10_000
SCHEMA_VERSION = 1
INITS = ("single-cluster", "k-means-like-random", "given")


def compute_vn(t: int, n: int, alpha: float, k_prior: KPrior, tol: float = 1e-15) -> float:
    """``log V_n(t)`` for the mixture-of-finite-mixtures partition prior.

    ``V_n(t) = sum_{K >= t} p(K) K! / (K - t)! * Gamma(alpha K) / Gamma(alpha K + n)``,
    summed in log space until a term drops below ``tol`` relative to the
    partial sum while the terms are decreasing.
    """
    if t < 0 or t > n + 1:
        raise ConfigError(f"V_n(t) needs 0 <= t <= n + 1, got t={t}, n={n}")
    if k_prior.kind == "point":
        K = k_prior.point
        if K < max(t, 1):
            return -math.inf
        return float(_vn_terms(np.array([K]), t, n, alpha, k_prior)[0])
    log_tol = math.log(tol)
    total = -math.inf
    prev = -math.inf
    K = max(t, 1)
    for _ in range(MAX_SERIES_TERMS):
        term = float(_vn_terms(np.array([K]), t, n, alpha, k_prior)[0])
        total = np.logaddexp(total, term)
        if term < prev and term < total + log_tol:
            return float(total)
        prev = term
        K += 1
    raise ConvergenceError(f"V_n({t}) series did not converge in {MAX_SERIES_TERMS} terms")


def _vn_terms(K, t, n, alpha, k_prior):
    K = np.asarray(K, dtype=float)
    return (
        k_prior.logpmf(K)
        + gammaln(K + 1)
        - gammaln(K - t + 1)
        + gammaln(alpha * K)
        - gammaln(alpha * K + n)
    )


@dataclass
class VnCache:
    """Lazily filled table of ``log V_n(t)``."""

    n: int
    alpha: float
    k_prior: KPrior
    tol: float = 1e-15
    values: dict = field(default_factory=dict)
    hits: int = 0

    def __call__(self, t: int) -> float:
        if t in self.values:
            self.hits += 1
            return self.values[t]
        v = compute_vn(t, self.n, self.alpha, self.k_prior, self.tol)
        if not v > -math.inf and self.k_prior.kind != "point":
            raise ConvergenceError(f"V_n({t}) is zero")
        self.values[t] = v
        return v

    def log_new_table(self, k_max: int) -> np.ndarray:
        """``log(alpha V_n(l + 1) / V_n(l))`` for ``l = 0..k_max``; blocked at ``l = k_max``."""
        out = np.full(k_max + 1, -np.inf)
        top = min(k_max, self.n)
        for ell in range(1, top):
            out[ell] = math.log(self.alpha) + self(ell + 1) - self(ell)
        out[0] = 0.0
        return out


@dataclass
class ChainConfig:
    n_iter: int = 2000
    burn_in: int = 1000
    thin: int = 1
    seed: int = 0
    init: str = "k-means-like-random"
    k_init: int | None = None
    z_init: list | None = None

    def __post_init__(self):
        if self.n_iter < 1 or self.thin < 1:
            raise ConfigError("n_iter and thin must be positive")
        if not 0 <= self.burn_in < self.n_iter:
            raise ConfigError("need 0 <= burn_in < n_iter")
        if self.init not in INITS:
            raise ConfigError(f"init must be one of {INITS}")
        if self.init == "given" and self.z_init is None:
            raise ConfigError("init='given' needs z_init")
        if self.k_init is not None and self.k_init < 1:
            raise ConfigError("k_init must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["z_init"] is not None:
            d["z_init"] = [int(v) for v in d["z_init"]]
        return d


@dataclass(eq=False)
class Model:
    """Everything a sweep needs that stays fixed over a chain."""

    dataset: Dataset
    prior: PriorConfig
    kernel: RepulsionKernel
    coef_prior: CoefficientPrior
    vn: VnCache
    W: np.ndarray
    C: np.ndarray
    by_rejection: bool

    @classmethod
    def build(cls, dataset, prior, kernel, coef_prior=None, vn=None) -> Model:
        if coef_prior is None:
            coef_prior = CoefficientPrior.g_prior(dataset, prior.resolve_g(dataset.n))
        if kernel.dim is not None and kernel.dim != dataset.p:
            raise ConfigError(f"kernel dimension {kernel.dim} != design p={dataset.p}")
        if vn is None:
            vn = VnCache(dataset.n, prior.alpha, prior.k_prior)
        W = kernel.factor if kernel.factor is not None else np.eye(dataset.p)
        mass = truncated_invgamma_mass(prior.a0, prior.b0, prior.sigma2_lo, prior.sigma2_hi)
        return cls(
            dataset, prior, kernel, coef_prior, vn,
            np.ascontiguousarray(W, dtype=float),
            np.ascontiguousarray(coef_prior.cov_factor, dtype=float),
            bool(mass > 0.25),
        )

    def prior_draw(self, rng, size):
        s2, _ = truncated_invgamma(
            rng, self.prior.a0, self.prior.b0, self.prior.sigma2_lo, self.prior.sigma2_hi, size=size
        )
        s2 = np.atleast_1d(s2)
        return self.coef_prior.sample(rng, s2), s2


def _new_diagnostics() -> dict:
    return {
        "aux_rejection_caps": 0,
        "assignment_underflows": 0,
        "aux_tries": 0,
        "aux_draws": 0,
        "new_clusters": 0,
        "coef_tries": 0,
        "coef_updates": 0,
        "coef_rejection_caps": 0,
        "sigma2_clamps": 0,
        "k_underflows": 0,
    }


def _ensure_capacity(state: MixtureState, need: int) -> MixtureState:
    cap = len(state.alive)
    if cap >= need:
        return state
    extra = need - cap
    p = state.beta.shape[1]
    return MixtureState(
        state.z,
        np.vstack([state.beta, np.zeros((extra, p))]),
        np.concatenate([state.sigma2, np.ones(extra)]),
        np.concatenate([state.alive, np.zeros(extra, dtype=bool)]),
        state.weights,
    )


def draw_auxiliary_component(state, dataset, prior, kernel, rng, coef_prior=None,
                             diagnostics=None, model=None) -> ComponentParams:
    """Draw ``(beta, sigma^2)`` from the prior tilted by ``h_{K+1}``.

    Proposals come from the truncated inverse-gamma and coefficient priors and
    are accepted with probability ``h`` of the occupied coefficients together
    with the proposal. After ``max_rejection_iters`` failures the last
    proposal is returned and a rejection-cap event is counted.
    """
    model = model or Model.build(dataset, prior, kernel, coef_prior)
    p = dataset.p
    alive = np.zeros(len(state.alive), dtype=np.bool_)
    if state.z.size:
        alive[list(state.occupied)] = True
    coords = np.ascontiguousarray(state.beta @ model.W.T)
    beta_out = np.empty(p)
    coord_out = np.empty(p)
    s2, tries, capped = _kernels.draw_aux(
        rng, beta_out, coord_out, coords, alive, prior.a0, prior.b0, prior.sigma2_lo,
        prior.sigma2_hi, model.by_rejection, model.C, model.W, model.coef_prior.scales_with_sigma,
        kernel.active, kernel.g0, prior.max_rejection_iters,
    )
    if diagnostics is not None:
        diagnostics["aux_tries"] = diagnostics.get("aux_tries", 0) + tries
        if capped:
            diagnostics["aux_rejection_caps"] = diagnostics.get("aux_rejection_caps", 0) + 1
    return ComponentParams(beta_out, s2)


def assignment_sweep(state, dataset, prior, kernel, vn, rng, coef_prior=None,
                     diagnostics=None, model=None) -> MixtureState:
    """Reassign every observation given the others (collapsed over weights).

    Empty components are discarded first; only occupied components and one
    fresh tilted-prior proposal per observation compete. At most
    ``prior.k_max`` components may be occupied.
    """
    model = model or Model.build(dataset, prior, kernel, coef_prior, vn)
    diagnostics = diagnostics if diagnostics is not None else _new_diagnostics()
    state = _ensure_capacity(state.copy(), max(prior.k_max + 1, int(state.z.max()) + 2))
    counts = np.bincount(state.z, minlength=len(state.alive)).astype(np.int64)
    alive = counts > 0
    state.alive = alive
    coords = np.ascontiguousarray(state.beta @ model.W.T)
    log_new = model.vn.log_new_table(prior.k_max)
    diag = np.zeros(5, dtype=np.int64)
    z = state.z.astype(np.int64)
    _kernels.assignment_sweep_kernel(
        rng, dataset.X, dataset.y, z, state.beta, state.sigma2, counts, alive, coords, log_new,
        float(prior.alpha), int(prior.k_max), float(prior.a0), float(prior.b0),
        float(prior.sigma2_lo), float(prior.sigma2_hi), model.by_rejection, model.C, model.W,
        model.coef_prior.scales_with_sigma, kernel.active, float(kernel.g0),
        int(prior.max_rejection_iters), diag,
    )
    state.z = z
    for key, v in zip(
        ("aux_rejection_caps", "assignment_underflows", "aux_tries", "aux_draws", "new_clusters"),
        diag,
    ):
        diagnostics[key] = diagnostics.get(key, 0) + int(v)
    return state


def k_log_weights(Ks, ell, n, prior: PriorConfig, log_zt, zk: ZkTable | None) -> np.ndarray:
    """Unnormalized ``log p(K | -)`` over candidate ``K``.

    ``zk=None`` means every ``Z_K`` is one (no repulsion).

    ``k_weight='literal'`` uses ``Z~_K / Z_K * K! / ((K - l)! (K + n)!)``;
    ``'general'`` uses ``Z~_K / Z_K * p(K) K! / (K - l)! * Gamma(aK) / Gamma(aK + n)``.
    """
    Ks = np.asarray(Ks, dtype=float)
    base = gammaln(Ks + 1) - gammaln(Ks - ell + 1)
    if prior.k_weight == "literal":
        base = base - gammaln(Ks + n + 1)
    else:
        a = prior.alpha
        base = base + prior.k_prior.logpmf(Ks) + gammaln(a * Ks) - gammaln(a * Ks + n)
    ratio = np.array([log_zt[int(K)] - (0.0 if zk is None else zk.log_z(int(K))) for K in Ks])
    return base + ratio


def sample_k(state, dataset, prior, kernel, zk: ZkTable, rng, coef_prior=None,
             diagnostics=None, model=None):
    """Draw ``K`` from ``{l, ..., l + m_window}`` (capped at ``k_max``).

    Returns ``(K, state)`` where the state carries ``K - l`` freshly drawn
    empty components from the untilted prior.
    """
    model = model or Model.build(dataset, prior, kernel, coef_prior)
    diagnostics = diagnostics if diagnostics is not None else _new_diagnostics()
    occ = sorted(state.occupied)
    ell = len(occ)
    if ell < 1:
        raise ConfigError("sample_k needs at least one occupied component")
    top = min(ell + prior.m_window, prior.k_max)
    Ks = list(range(ell, max(top, ell) + 1))
    state = state.copy()
    state.alive = np.zeros(len(state.alive), dtype=bool)
    state.alive[occ] = True
    if len(Ks) == 1:
        return ell, state
    if kernel.active:
        log_zt = {}
        try:
            log_zt = ztilde_log_estimates(state, dataset, prior, kernel, Ks, rng, model.coef_prior)
        except EstimateUnderflowError:
            # fall back to per-K estimates so one underflowing candidate does not sink the rest
            for K in Ks:
                try:
                    log_zt.update(
                        ztilde_log_estimates(state, dataset, prior, kernel, [K], rng, model.coef_prior)
                    )
                except EstimateUnderflowError:
                    log_zt[K] = -math.inf
    else:
        log_zt = {K: 0.0 for K in Ks}
    logw = k_log_weights(Ks, ell, dataset.n, prior, log_zt, zk if kernel.active else None)
    if not np.any(np.isfinite(logw)):
        diagnostics["k_underflows"] += 1
        return ell, state
    probs = np.exp(logw - logsumexp(logw))
    K = Ks[int(rng.choice(len(Ks), p=probs / probs.sum()))]
    if K > ell:
        state = _ensure_capacity(state, int(np.flatnonzero(state.alive).max()) + 1 + K - ell)
        free = np.flatnonzero(~state.alive)[: K - ell]
        betas, s2 = model.prior_draw(rng, K - ell)
        state.beta[free] = betas
        state.sigma2[free] = s2
        state.alive[free] = True
    return K, state


def variance_sweep(state, dataset, prior, rng, diagnostics=None) -> MixtureState:
    """Truncated inverse-gamma update of every alive component's variance.

    Occupied components use ``IG(a0 + n_c / 2, b0 + RSS_c / 2)``; empty ones
    redraw from the truncated prior.
    """
    diagnostics = diagnostics if diagnostics is not None else _new_diagnostics()
    state = state.copy()
    ids = np.flatnonzero(state.alive)
    if ids.size == 0:
        return state
    resid = dataset.y - np.einsum("ij,ij->i", dataset.X, state.beta[state.z])
    n_c = np.bincount(state.z, minlength=len(state.alive))[ids]
    rss = np.bincount(state.z, weights=resid**2, minlength=len(state.alive))[ids]
    draws, clamped = truncated_invgamma(
        rng, prior.a0 + 0.5 * n_c, prior.b0 + 0.5 * rss, prior.sigma2_lo, prior.sigma2_hi
    )
    state.sigma2[ids] = np.atleast_1d(draws)
    diagnostics["sigma2_clamps"] = diagnostics.get("sigma2_clamps", 0) + clamped
    return state


def conditional_moments(state, dataset, coef_prior, ids):
    """Mean and upper-triangular factor ``R`` (draw = mean + R^T-solve) per component.

    Returns ``(means, factors)`` with ``mean + factors[c] @ z`` distributed as
    the conjugate conditional of component ``c`` (the prior for empty ones).
    """
    p = dataset.p
    means = np.zeros((len(ids), p))
    factors = np.empty((len(ids), p, p))
    counts = np.bincount(state.z, minlength=len(state.alive))
    for j, c in enumerate(ids):
        s2 = state.sigma2[c]
        if counts[c] == 0:
            f = coef_prior.cov_factor
            factors[j] = f * math.sqrt(s2) if coef_prior.scales_with_sigma else f
            continue
        rows = state.z == c
        Xc = dataset.X[rows]
        prec = Xc.T @ Xc / s2 + coef_prior.precision(s2)
        L = np.linalg.cholesky(prec)
        means[j] = np.linalg.solve(prec, Xc.T @ dataset.y[rows] / s2)
        # cov = prec^{-1} = L^{-T} L^{-1}
        factors[j] = np.linalg.solve(L.T, np.eye(p))
    return means, factors


def coefficient_sweep(state, dataset, prior, kernel, rng, coef_prior=None,
                      diagnostics=None, model=None) -> MixtureState:
    """Joint accept-reject update of every alive component's coefficients.

    The block is proposed from the product of conditionals (prior for empty
    components) and resampled until accepted with probability ``h_K``; the
    accepted draw is exact for the ``h``-tilted conditional. After
    ``max_rejection_iters`` proposals the previous coefficients are kept.
    """
    model = model or Model.build(dataset, prior, kernel, coef_prior)
    diagnostics = diagnostics if diagnostics is not None else _new_diagnostics()
    state = state.copy()
    ids = np.flatnonzero(state.alive)
    if ids.size == 0:
        return state
    means, factors = conditional_moments(state, dataset, model.coef_prior, ids)
    K, p = means.shape
    tried = 0
    batch = 4
    limit = prior.max_rejection_iters
    while tried < limit:
        b = 1 if not kernel.active or K < 2 else min(batch, limit - tried)
        zs = rng.standard_normal((b, K, p))
        props = means[None] + np.einsum("kij,bkj->bki", factors, zs)
        if b == 1 and (not kernel.active or K < 2):
            tried += 1
            state.beta[ids] = props[0]
            diagnostics["coef_tries"] += tried
            diagnostics["coef_updates"] += 1
            return state
        logh = pairwise_log_h(props @ model.W.T, kernel.g0)
        u = rng.random(b)
        hit = np.flatnonzero(np.log(u) < logh)
        if hit.size:
            first = int(hit[0])
            tried += first + 1
            state.beta[ids] = props[first]
            diagnostics["coef_tries"] += tried
            diagnostics["coef_updates"] += 1
            return state
        tried += b
        batch = min(2 * batch, 64)
    diagnostics["coef_tries"] += tried
    diagnostics["coef_rejection_caps"] += 1
    return state


def _ols(X, y, ridge=0.0):
    A = X.T @ X + ridge * np.eye(X.shape[1])
    return np.linalg.solve(A, X.T @ y)


LLOYD_STEPS = 10


def lloyd_partition(X, y, k, rng, n_steps=LLOYD_STEPS) -> np.ndarray:
    """Random-start hard clustering of regression lines.

    Seeds ``k`` lines by least squares on random subsets of ``p + 1`` rows,
    then alternates nearest-line assignment (squared residual) and per-cluster
    refits. Clusters that empty out are dropped. Returns compact labels.
    """
    n, p = X.shape
    k = max(1, min(k, n // (p + 1)))
    ridge = 1e-6 * np.trace(X.T @ X) / (n * p)
    subsets = np.argsort(rng.random((k, n)), axis=1)[:, : p + 1]
    beta = np.stack([_ols(X[r], y[r], ridge) for r in subsets])
    z = None
    for _ in range(n_steps):
        new = np.argmin((y[:, None] - X @ beta.T) ** 2, axis=1)
        if z is not None and np.array_equal(new, z):
            break
        used, z = np.unique(new, return_inverse=True)
        beta = np.stack([_ols(X[z == c], y[z == c], ridge) for c in range(len(used))])
    return z.astype(np.int64)


def _fit_partition(dataset, z, lo, hi) -> MixtureState:
    p = dataset.p
    k = int(z.max()) + 1
    ridge = 1e-6 * np.trace(dataset.gram) / p
    beta = np.zeros((k, p))
    s2 = np.empty(k)
    for c in range(k):
        rows = z == c
        beta[c] = _ols(dataset.X[rows], dataset.y[rows], ridge)
        s2[c] = np.clip(np.mean((dataset.y[rows] - dataset.X[rows] @ beta[c]) ** 2), lo, hi)
    return MixtureState(z.astype(np.int64), beta, s2, np.ones(k, dtype=bool))


def initial_state(dataset, prior, kernel, chain: ChainConfig, rng, coef_prior=None,
                  model=None) -> MixtureState:
    """Starting state for a chain.

    ``single-cluster`` puts everything in component 0 at the least-squares
    fit. ``k-means-like-random`` runs :func:`lloyd_partition` with ``k_init``
    lines (default ``k_max``). ``given`` starts from ``chain.z_init``. The
    last two use per-cluster least-squares fits as starting parameters.
    """
    n = dataset.n
    lo, hi = prior.sigma2_lo, prior.sigma2_hi
    if chain.init == "single-cluster":
        beta = (dataset.gram_inv @ dataset.X.T @ dataset.y)[None]
        s2 = np.clip(np.mean((dataset.y - dataset.X @ beta[0]) ** 2), lo, hi)
        z = np.zeros(n, dtype=np.int64)
        return MixtureState(z, beta, np.array([s2]), np.array([True]))
    if chain.init == "given":
        z_in = np.asarray(chain.z_init)
        if z_in.shape != (n,):
            raise ConfigError(f"z_init has shape {z_in.shape}, expected ({n},)")
        _, z = np.unique(z_in, return_inverse=True)
        return _fit_partition(dataset, z, lo, hi)
    k = min(chain.k_init or prior.k_max, prior.k_max, n)
    return _fit_partition(dataset, lloyd_partition(dataset.X, dataset.y, k, rng), lo, hi)


def _snapshot(state: MixtureState) -> MixtureState:
    live = np.flatnonzero(state.alive)
    top = int(live.max()) + 1 if live.size else 1
    return MixtureState(
        state.z.astype(np.int32),
        state.beta[:top].copy(),
        state.sigma2[:top].copy(),
        state.alive[:top].copy(),
    )


def run_chain(dataset, prior, kernel, chain: ChainConfig, zk: ZkTable | None = None,
              coef_prior=None, model_tag: str = "rgrm") -> Draws:
    """Run one chain and return its post burn-in, thinned draws."""
    model = Model.build(dataset, prior, kernel, coef_prior)
    if zk is None:
        if kernel.active and prior.m_window > 0:
            raise ConfigError("an active repulsion kernel needs a Z_K table")
        zk = ZkTable(k_max=prior.k_max)
    elif kernel.active and prior.m_window > 0 and zk.k_max < prior.k_max:
        raise ConfigError(f"Z_K table covers K <= {zk.k_max}, need {prior.k_max}")
    rng = np.random.default_rng(chain.seed)
    diagnostics = _new_diagnostics()
    state = initial_state(dataset, prior, kernel, chain, rng, model=model)
    state = variance_sweep(state, dataset, prior, rng, diagnostics)
    state = coefficient_sweep(state, dataset, prior, kernel, rng, diagnostics=diagnostics, model=model)
    kept = []
    k_trace = []
    for it in range(chain.n_iter):
        state = assignment_sweep(state, dataset, prior, kernel, model.vn, rng,
                                 diagnostics=diagnostics, model=model)
        K, state = sample_k(state, dataset, prior, kernel, zk, rng,
                            diagnostics=diagnostics, model=model)
        state = variance_sweep(state, dataset, prior, rng, diagnostics)
        state = coefficient_sweep(state, dataset, prior, kernel, rng,
                                  diagnostics=diagnostics, model=model)
        if it >= chain.burn_in and (it - chain.burn_in) % chain.thin == 0:
            kept.append(_snapshot(state))
            k_trace.append(K)
    diagnostics["vn_cache_hits"] = model.vn.hits
    tries = diagnostics["coef_tries"]
    diagnostics["coef_acceptance_rate"] = diagnostics["coef_updates"] / tries if tries else 1.0
    aux = diagnostics["aux_tries"]
    diagnostics["aux_acceptance_rate"] = diagnostics["aux_draws"] / aux if aux else 1.0
    meta = {
        "seed": chain.seed,
        "n_iter": chain.n_iter,
        "burn_in": chain.burn_in,
        "thin": chain.thin,
        "init": chain.init,
        "model": model_tag,
        "prior": prior.to_dict(),
        "kernel": {"metric": kernel.metric, "g0": kernel.g0},
        "coef_prior": model.coef_prior.describe(),
        "k_total": k_trace,
        "diagnostics": diagnostics,
    }
    return Draws(kept, meta)


def _state_record(state: MixtureState) -> dict:
    ids = np.flatnonzero(state.alive)
    rec = {
        "z": [int(v) for v in state.z],
        "K_total": int(ids.size),
        "components": {
            str(int(c)): {"beta": [float(v) for v in state.beta[c]], "sigma2": float(state.sigma2[c])}
            for c in ids
        },
    }
    if state.weights is not None:
        rec["weights"] = [float(v) for v in state.weights]
    return rec


def write_draws_jsonl(path, draws: Draws):
    """Header line with metadata, then one JSON object per kept state."""
    with Path(path).open("w") as fh:
        header = {"schema_version": SCHEMA_VERSION, "meta": draws.meta}
        fh.write(json.dumps(header, sort_keys=True, default=_json_default) + "\n")
        fh.writelines(json.dumps(_state_record(s), sort_keys=True) + "\n" for s in draws.states)


def read_draws_jsonl(path) -> Draws:
    with Path(path).open() as fh:
        header = json.loads(fh.readline())
        states = []
        for line in fh:
            rec = json.loads(line)
            comps = {int(k): v for k, v in rec["components"].items()}
            top = max(comps) + 1
            p = len(next(iter(comps.values()))["beta"])
            beta = np.zeros((top, p))
            s2 = np.ones(top)
            alive = np.zeros(top, dtype=bool)
            for c, v in comps.items():
                beta[c] = v["beta"]
                s2[c] = v["sigma2"]
                alive[c] = True
            w = np.array(rec["weights"]) if "weights" in rec else None
            states.append(MixtureState(np.array(rec["z"], dtype=np.int32), beta, s2, alive, w))
    return Draws(states, header["meta"])


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")
