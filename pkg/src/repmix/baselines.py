"""Comparison models: repulsive and plain MFM regressions with a normal
coefficient prior, and an overfitted mixture with sparse Dirichlet weights.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import logsumexp

from .core import ConfigError, Dataset, Draws, MixtureState, PriorConfig
from .distributions import CoefficientPrior
from .normalizer import ZkTable, build_zk_table
from .repulsion import RepulsionKernel
from .sampler import ChainConfig, lloyd_partition, run_chain

METHODS = ("rgrm", "rrm", "mfm", "sid1", "sid2")
SID_ALPHA = {"sid1": 0.1, "sid2": 0.02}


@dataclass(frozen=True)
class SidConfig:
    """Overfitted mixture settings.

    Each of the ``k_fit`` weights gets Dirichlet concentration
    ``alpha_total / k_fit``; a component counts as effective when its weight
    exceeds ``eff_threshold``.
    """

    k_fit: int = 20
    alpha_total: float = 0.1
    tau2: float = 1.0
    a0: float = 4.0
    b0: float = 4.0
    eff_threshold: float = 1e-3

    def __post_init__(self):
        # k_fit = 1 is allowed: it is the single-regression limit
        if int(self.k_fit) != self.k_fit or self.k_fit < 1:
            raise ConfigError("k_fit must be a positive integer")
        for name in ("alpha_total", "tau2", "a0", "b0"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.eff_threshold < 1:
            raise ConfigError("eff_threshold must lie in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> SidConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown SID fields {sorted(unknown)}")
        return cls(**d)


def model_parts(method: str, dataset: Dataset, prior: PriorConfig):
    """Kernel and coefficient prior for one of the collapsed models."""
    if method == "rgrm":
        g = prior.resolve_g(dataset.n)
        return RepulsionKernel.mahalanobis(dataset, g, prior.g0), CoefficientPrior.g_prior(dataset, g)
    normal = CoefficientPrior.normal(dataset.p, prior.tau2)
    if method == "rrm":
        return RepulsionKernel.euclidean(prior.g0), normal
    if method == "mfm":
        return RepulsionKernel.none(), normal
    raise ConfigError(f"unknown collapsed model {method!r}")


def _run_collapsed(method, dataset, prior, chain, zk, zk_seed):
    kernel, coef = model_parts(method, dataset, prior)
    if zk is None and kernel.active:
        zk = build_zk_table(dataset, prior, kernel, chain.seed if zk_seed is None else zk_seed, coef)
    return run_chain(dataset, prior, kernel, chain, zk, coef_prior=coef, model_tag=method)


def run_rgrm(dataset: Dataset, prior: PriorConfig, chain: ChainConfig,
             zk: ZkTable | None = None, zk_seed: int | None = None) -> Draws:
    """g-prior coefficients with repulsion in the predictive metric.

    Builds the ``Z_K`` table from ``zk_seed`` (default: the chain seed) when
    none is passed.
    """
    return _run_collapsed("rgrm", dataset, prior, chain, zk, zk_seed)


def run_rrm(dataset: Dataset, prior: PriorConfig, chain: ChainConfig,
            zk: ZkTable | None = None, zk_seed: int | None = None) -> Draws:
    """``N(0, tau2 I)`` coefficients with Euclidean repulsion."""
    return _run_collapsed("rrm", dataset, prior, chain, zk, zk_seed)


def run_mfm(dataset: Dataset, prior: PriorConfig, chain: ChainConfig) -> Draws:
    """``N(0, tau2 I)`` coefficients, no repulsion."""
    return _run_collapsed("mfm", dataset, prior, chain, None, None)


def _log_dirichlet(rng, conc):
    """Log of a Dirichlet draw, stable for concentrations far below one.

    Uses ``Gamma(a) = Gamma(a + 1) U^{1/a}`` so tiny shapes do not round to zero.
    """
    log_g = np.log(rng.gamma(conc + 1.0)) + np.log(rng.random(conc.shape)) / conc
    return log_g - logsumexp(log_g)


def _sample_categorical_rows(rng, logp):
    """One index per row of unnormalized log probabilities."""
    p = np.exp(logp - logp.max(axis=1, keepdims=True))
    cdf = np.cumsum(p, axis=1)
    u = rng.random(logp.shape[0]) * cdf[:, -1]
    idx = (cdf < u[:, None]).sum(axis=1)
    return np.minimum(idx, logp.shape[1] - 1)


def _sid_coefficients(rng, X, y, z, sigma2, k_fit, tau2):
    p = X.shape[1]
    beta = np.empty((k_fit, p))
    eye = np.eye(p) / tau2
    for k in range(k_fit):
        rows = z == k
        prec = X[rows].T @ X[rows] / sigma2[k] + eye
        L = np.linalg.cholesky(prec)
        mean = np.linalg.solve(prec, X[rows].T @ y[rows] / sigma2[k])
        beta[k] = mean + np.linalg.solve(L.T, rng.standard_normal(p))
    return beta


def run_sid(dataset: Dataset, sid: SidConfig, chain: ChainConfig, model_tag: str = "sid") -> Draws:
    """Blocked Gibbs for the overfitted mixture.

    Each iteration draws assignments given weights and parameters, then the
    weights, the coefficients and the (untruncated) variances. Starting
    variances come from the prior; the default starting partition is
    :func:`~repmix.sampler.lloyd_partition`.
    """
    X, y = dataset.X, dataset.y
    n = X.shape[0]
    K = sid.k_fit
    rng = np.random.default_rng(chain.seed)
    conc = np.full(K, sid.alpha_total / K)

    sigma2 = sid.b0 / rng.gamma(sid.a0, size=K)
    if chain.init == "given":
        _, z = np.unique(np.asarray(chain.z_init), return_inverse=True)
        if z.shape != (n,) or z.max() >= K:
            raise ConfigError("z_init must have length n and at most k_fit labels")
    elif chain.init == "single-cluster":
        z = np.zeros(n, dtype=np.int64)
    else:
        z = lloyd_partition(X, y, chain.k_init or K, rng)
    log_w = _log_dirichlet(rng, conc + np.bincount(z, minlength=K))
    beta = _sid_coefficients(rng, X, y, z, sigma2, K, sid.tau2)

    kept = []
    alive = np.ones(K, dtype=bool)
    for it in range(chain.n_iter):
        resid = y[:, None] - X @ beta.T
        logp = log_w - 0.5 * np.log(sigma2) - 0.5 * resid**2 / sigma2
        z = _sample_categorical_rows(rng, logp)
        counts = np.bincount(z, minlength=K)
        log_w = _log_dirichlet(rng, conc + counts)
        beta = _sid_coefficients(rng, X, y, z, sigma2, K, sid.tau2)
        rss = np.bincount(z, weights=(y - np.einsum("ij,ij->i", X, beta[z])) ** 2, minlength=K)
        sigma2 = (sid.b0 + 0.5 * rss) / rng.gamma(sid.a0 + 0.5 * counts)
        if it >= chain.burn_in and (it - chain.burn_in) % chain.thin == 0:
            w = np.exp(log_w)
            kept.append(MixtureState(z.astype(np.int32), beta.copy(), sigma2.copy(), alive.copy(),
                                     w / w.sum()))
    meta = {
        "seed": chain.seed,
        "n_iter": chain.n_iter,
        "burn_in": chain.burn_in,
        "thin": chain.thin,
        "init": chain.init,
        "model": model_tag,
        "sid": sid.to_dict(),
    }
    return Draws(kept, meta)


def run_method(method: str, dataset: Dataset, prior: PriorConfig, chain: ChainConfig,
               sid: SidConfig | None = None, zk: ZkTable | None = None) -> Draws:
    """Dispatch by method name: ``rgrm``, ``rrm``, ``mfm``, ``sid``, ``sid1`` or ``sid2``.

    ``sid1``/``sid2`` fix the Dirichlet mass at 0.1/0.02 and take the other
    SID settings from ``sid`` (or the prior's ``tau2``, ``a0``, ``b0`` and
    ``k_max`` when ``sid`` is None).
    """
    if method in ("rgrm", "rrm"):
        return _run_collapsed(method, dataset, prior, chain, zk, None)
    if method == "mfm":
        return run_mfm(dataset, prior, chain)
    if method in ("sid", "sid1", "sid2"):
        if sid is None:
            sid = SidConfig(k_fit=prior.k_max, tau2=prior.tau2, a0=prior.a0, b0=prior.b0)
        if method in SID_ALPHA:
            sid = SidConfig(**{**sid.to_dict(), "alpha_total": SID_ALPHA[method]})
        return run_sid(dataset, sid, chain, model_tag=method)
    raise ConfigError(f"unknown method {method!r}")
