"""Shared domain types: datasets, hyperparameters, mixture states and chains."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy.special import gammaln

PIVOT_FLOOR = 1e-12


class ReproMixError(Exception):
    """Base class for all errors raised by this package."""

    kind = "error"


class DimensionMismatchError(ReproMixError, ValueError):
    kind = "dimension"


class SingularDesignError(ReproMixError, ValueError):
    kind = "singular-design"


class ConfigError(ReproMixError, ValueError):
    kind = "config"


class EstimateUnderflowError(ReproMixError, ArithmeticError):
    """Every Monte Carlo draw of the repulsion function was exactly zero."""

    kind = "estimate-underflow"

    def __init__(self, n_zero, n_samples):
        super().__init__(f"all {n_zero} of {n_samples} repulsion draws were zero")
        self.n_zero = n_zero
        self.n_samples = n_samples


class ConvergenceError(ReproMixError, RuntimeError):
    kind = "non-convergence"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix and response with cached Gram factorizations.

    Build instances with :func:`build_dataset`, which validates the design.
    """

    X: np.ndarray
    y: np.ndarray
    gram: np.ndarray
    gram_chol: np.ndarray
    gram_inv: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @cached_property
    def gram_chol_inv_t(self) -> np.ndarray:
        """``L^{-T}``; ``L^{-T} z`` has covariance ``(X^T X)^{-1}`` for standard normal ``z``."""
        return sla.solve_triangular(self.gram_chol, np.eye(self.p), lower=True).T


def build_dataset(X, y) -> Dataset:
    """Validate ``(X, y)`` and factor the Gram matrix ``X^T X``.

    Raises
    ------
    DimensionMismatchError
        If ``X`` is not a matrix or its row count differs from ``len(y)``.
    SingularDesignError
        If a Cholesky pivot falls below ``1e-12 * trace(X^T X) / p``.
    """
    X = np.array(X, dtype=float)
    y = np.array(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or y.ndim != 1:
        raise DimensionMismatchError(f"expected 2-d X and 1-d y, got {X.shape} and {y.shape}")
    n, p = X.shape
    if n < 1 or p < 1:
        raise DimensionMismatchError(f"empty design {X.shape}")
    if y.shape[0] != n:
        raise DimensionMismatchError(f"X has {n} rows but y has length {y.shape[0]}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ConfigError("design or response contains non-finite values")

    gram = X.T @ X
    gram = 0.5 * (gram + gram.T)
    floor = PIVOT_FLOOR * np.trace(gram) / p
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularDesignError("X^T X is not positive definite") from exc
    if not np.all(np.diag(chol) ** 2 > floor):
        raise SingularDesignError(
            f"Cholesky pivot {np.min(np.diag(chol)) ** 2:.3e} below floor {floor:.3e}"
        )
    gram_inv = sla.cho_solve((chol, True), np.eye(p))
    gram_inv = 0.5 * (gram_inv + gram_inv.T)
    for arr in (X, y, gram, chol, gram_inv):
        arr.setflags(write=False)
    return Dataset(X=X, y=y, gram=gram, gram_chol=chol, gram_inv=gram_inv)


def read_dataset_csv(path):
    """Read ``x1..xp, y[, z_true]`` columns from a CSV with a header row.

    Returns ``(dataset, z_true)`` where ``z_true`` is ``None`` if absent.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ConfigError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    if "y" not in header:
        raise ConfigError(f"{path}: no 'y' column")
    xcols = [i for i, h in enumerate(header) if h.startswith("x")]
    if not xcols:
        raise ConfigError(f"{path}: no covariate columns x1..xp")
    xcols.sort(key=lambda i: int(header[i][1:]))
    iy = header.index("y")
    iz = header.index("z_true") if "z_true" in header else None
    try:
        table = [[float(v) if v.strip() != "" else math.nan for v in row] for row in rows]
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric value ({exc})") from None
    if any(len(r) != len(header) for r in table):
        raise ConfigError(f"{path}: ragged rows")
    arr = np.array(table, dtype=float).reshape(len(table), len(header))
    if np.isnan(arr).any():
        raise ConfigError(f"{path}: missing values are not allowed")
    z_true = arr[:, iz].astype(int) if iz is not None else None
    return build_dataset(arr[:, xcols], arr[:, iy]), z_true


def write_dataset_csv(path, dataset: Dataset, z_true=None):
    header = [f"x{j + 1}" for j in range(dataset.p)] + ["y"]
    if z_true is not None:
        header.append("z_true")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.X[i]] + [repr(float(dataset.y[i]))]
            if z_true is not None:
                row.append(str(int(z_true[i])))
            w.writerow(row)


@dataclass(frozen=True)
class KPrior:
    """Prior on the number of components.

    ``kind`` is one of

    * ``"poisson"``: Poisson(rate) conditioned on ``K >= 1``;
    * ``"shifted_poisson"``: ``K - 1 ~ Poisson(rate)``;
    * ``"geometric"``: ``P(K) = rate (1 - rate)^(K-1)`` with ``0 < rate < 1``;
    * ``"point"``: all mass on ``K = point``.
    """

    kind: str = "poisson"
    rate: float = 1.0
    point: int = 1

    def __post_init__(self):
        if self.kind not in ("poisson", "shifted_poisson", "geometric", "point"):
            raise ConfigError(f"unknown k_prior kind {self.kind!r}")
        if self.kind == "geometric" and not 0 < self.rate < 1:
            raise ConfigError("geometric k_prior needs 0 < rate < 1")
        if self.kind in ("poisson", "shifted_poisson") and not self.rate > 0:
            raise ConfigError("poisson k_prior needs rate > 0")
        if self.kind == "point" and self.point < 1:
            raise ConfigError("point k_prior needs point >= 1")

    def logpmf(self, K):
        K = np.asarray(K, dtype=float)
        with np.errstate(divide="ignore"):
            if self.kind == "poisson":
                lam = self.rate
                out = K * math.log(lam) - gammaln(K + 1) - math.log(math.expm1(lam))
            elif self.kind == "shifted_poisson":
                lam = self.rate
                out = (K - 1) * math.log(lam) - gammaln(K) - lam
            elif self.kind == "geometric":
                out = math.log(self.rate) + (K - 1) * math.log1p(-self.rate)
            else:
                out = np.where(K == self.point, 0.0, -np.inf)
        return np.where(K >= 1, out, -np.inf)


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters shared by the mixture samplers.

    ``g=None`` resolves to the sample size (unit-information g-prior) at fit
    time; see :meth:`resolve_g`.
    """

    g: float | None = None
    g0: float = 1.0
    alpha: float = 1.0
    a0: float = 4.0
    b0: float = 4.0
    sigma2_lo: float = 1e-4
    sigma2_hi: float = 1e4
    k_prior: KPrior = field(default_factory=KPrior)
    k_max: int = 20
    zk_samples: int = 20_000
    ztilde_samples: int = 2_000
    m_window: int = 3
    tau2: float = 1.0
    max_rejection_iters: int = 1000
    k_weight: str = "literal"

    def __post_init__(self):
        if isinstance(self.k_prior, dict):
            object.__setattr__(self, "k_prior", KPrior(**self.k_prior))
        checks = [
            (self.g is None or self.g > 0, "g must be positive"),
            (self.g0 >= 0, "g0 must be nonnegative"),
            (self.alpha > 0, "alpha must be positive"),
            (self.a0 > 0 and self.b0 > 0, "a0 and b0 must be positive"),
            (0 < self.sigma2_lo < self.sigma2_hi, "need 0 < sigma2_lo < sigma2_hi"),
            (self.k_max >= 1, "k_max must be >= 1"),
            (self.zk_samples >= 1 and self.ztilde_samples >= 1, "MC budgets must be >= 1"),
            (self.m_window >= 0, "m_window must be >= 0"),
            (self.tau2 > 0, "tau2 must be positive"),
            (self.max_rejection_iters >= 1, "max_rejection_iters must be >= 1"),
            (self.k_weight in ("literal", "general"), "k_weight must be 'literal' or 'general'"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    def resolve_g(self, n: int) -> float:
        return float(n) if self.g is None else float(self.g)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> PriorConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown prior fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class ComponentParams:
    beta: np.ndarray
    sigma2: float


@dataclass
class MixtureState:
    """One sweep's worth of mixture bookkeeping.

    Component ids index the rows of ``beta`` and entries of ``sigma2``;
    ``alive`` marks ids currently instantiated (occupied or empty). Only the
    overfitted-mixture sampler fills ``weights``.
    """

    z: np.ndarray
    beta: np.ndarray
    sigma2: np.ndarray
    alive: np.ndarray
    weights: np.ndarray | None = None

    def counts(self) -> np.ndarray:
        return np.bincount(self.z, minlength=len(self.alive))

    @property
    def occupied(self) -> set:
        return {int(c) for c in np.unique(self.z)}

    @property
    def K_total(self) -> int:
        return int(self.alive.sum())

    @property
    def components(self) -> dict:
        return {
            int(c): ComponentParams(self.beta[c].copy(), float(self.sigma2[c]))
            for c in np.flatnonzero(self.alive)
        }

    def copy(self) -> MixtureState:
        return MixtureState(
            self.z.copy(),
            self.beta.copy(),
            self.sigma2.copy(),
            self.alive.copy(),
            None if self.weights is None else self.weights.copy(),
        )

    def validate(self, n: int | None = None, p: int | None = None):
        if self.z.size == 0:
            raise ConfigError("state has no assignments")
        if n is not None and self.z.shape[0] != n:
            raise DimensionMismatchError(f"state has {self.z.shape[0]} assignments, expected {n}")
        if p is not None and self.beta.shape[1] != p:
            raise DimensionMismatchError(f"state has p={self.beta.shape[1]}, expected {p}")
        if self.z.min() < 0 or self.z.max() >= len(self.alive) or not self.alive[self.z].all():
            raise ConfigError("assignment refers to a component that does not exist")


def state_summary(state: MixtureState) -> dict:
    """Occupied count and cluster sizes for a state."""
    if state.z.size == 0:
        raise ConfigError("state_summary needs an initialized state")
    ids, sizes = np.unique(state.z, return_counts=True)
    return {
        "K_total": state.K_total,
        "occupied_count": len(ids),
        "cluster_sizes": {int(i): int(s) for i, s in zip(ids, sizes)},
    }


@dataclass
class Draws:
    """Post burn-in, thinned chain output plus run metadata."""

    states: list
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.states)

    def occupied_counts(self) -> np.ndarray:
        return np.array([len(np.unique(s.z)) for s in self.states])
