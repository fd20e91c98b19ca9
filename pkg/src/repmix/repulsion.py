"""Repulsion functions and the design-induced distance between coefficient vectors.

The predictive (Mahalanobis) distance between two coefficient vectors is

    d_M(b, b') = (b - b')^T (X^T X / g) (b - b'),

which is the mean squared gap between the fitted values ``X b`` and ``X b'``
scaled by ``n / g``. With ``X^T X = L L^T`` the map ``b -> L^T b / sqrt(g)``
turns ``d_M`` into a squared Euclidean distance and the g-prior
``N(0, g s^2 (X^T X)^{-1})`` into ``N(0, s^2 I)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, Dataset, DimensionMismatchError

METRICS = ("mahalanobis", "euclidean", "none")


@dataclass(frozen=True, eq=False)
class RepulsionKernel:
    """Distance metric plus the strength ``g0`` of ``G(t) = t / (t + g0)``.

    Use the constructors :meth:`mahalanobis`, :meth:`euclidean` and :meth:`none`.
    """

    metric: str
    g0: float = 1.0
    factor: np.ndarray | None = None  # W with d(b, b') = ||W (b - b')||^2
    g: float | None = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ConfigError(f"unknown metric {self.metric!r}")
        if self.g0 < 0:
            raise ConfigError("g0 must be nonnegative")
        if self.metric == "mahalanobis" and (self.factor is None or self.g is None or not self.g > 0):
            raise ConfigError("mahalanobis kernel needs a factor and g > 0")

    @classmethod
    def mahalanobis(cls, dataset_or_gram, g: float, g0: float = 1.0) -> RepulsionKernel:
        if isinstance(dataset_or_gram, Dataset):
            chol = dataset_or_gram.gram_chol
        else:
            gram = np.asarray(dataset_or_gram, dtype=float)
            if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
                raise DimensionMismatchError("gram must be square")
            try:
                chol = np.linalg.cholesky(gram)
            except np.linalg.LinAlgError as exc:
                raise ConfigError("metric matrix must be positive definite") from exc
        if not g > 0:
            raise ConfigError("g must be positive")
        w = np.ascontiguousarray(chol.T / np.sqrt(g))
        w.setflags(write=False)
        return cls("mahalanobis", float(g0), w, float(g))

    @classmethod
    def euclidean(cls, g0: float = 1.0) -> RepulsionKernel:
        return cls("euclidean", float(g0))

    @classmethod
    def none(cls) -> RepulsionKernel:
        return cls("none", 0.0)

    @property
    def dim(self) -> int | None:
        return None if self.factor is None else self.factor.shape[0]

    @property
    def active(self) -> bool:
        """False when ``h`` is identically one (no metric or ``g0 = 0``)."""
        return self.metric != "none" and self.g0 > 0

    def coords(self, betas) -> np.ndarray:
        """Map coefficient vectors (last axis) to coordinates where ``d`` is Euclidean."""
        betas = np.asarray(betas, dtype=float)
        if self.factor is None:
            return betas
        if betas.shape[-1] != self.factor.shape[1]:
            raise DimensionMismatchError(
                f"vector length {betas.shape[-1]} != kernel dimension {self.factor.shape[1]}"
            )
        return betas @ self.factor.T

    def describe(self) -> dict:
        d = {"metric": self.metric, "g0": self.g0}
        if self.metric == "mahalanobis":
            d["g"] = self.g
            d["factor"] = self.factor.tolist()
        return d


def g_func(t, g0):
    """``G(t) = t / (t + g0)``; identically one when ``g0 == 0``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or g0 < 0:
        raise ValueError("g_func needs t >= 0 and g0 >= 0")
    if g0 == 0:
        out = np.ones_like(t)
    else:
        out = t / (t + g0)
    return float(out) if out.ndim == 0 else out


def log_g_func(t, g0):
    t = np.asarray(t, dtype=float)
    if g0 == 0:
        return np.zeros_like(t)
    with np.errstate(divide="ignore"):
        return np.log(t) - np.log(t + g0)


def pair_distance(b1, b2, kernel: RepulsionKernel) -> float:
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    if b1.shape != b2.shape or b1.ndim != 1:
        raise DimensionMismatchError(f"shapes {b1.shape} and {b2.shape} differ")
    diff = kernel.coords(b1 - b2)
    return float(diff @ diff)


def pairwise_log_h(coords: np.ndarray, g0: float) -> np.ndarray:
    """``log h_K`` for a batch of configurations.

    ``coords`` has shape ``(..., K, p)`` in metric coordinates; returns shape ``(...)``.
    """
    K = coords.shape[-2]
    if K < 2 or g0 == 0:
        return np.zeros(coords.shape[:-2])
    # G is increasing, so the min over pairs sits at the smallest distance.
    # Component-major layout keeps every pair difference a contiguous vector op.
    ct = np.ascontiguousarray(np.moveaxis(coords, (-2, -1), (0, 1)))
    dmin = np.full(coords.shape[:-2], np.inf)
    for i in range(K - 1):
        for k in range(i + 1, K):
            diff = ct[i] - ct[k]
            np.minimum(dmin, np.einsum("j...,j...->...", diff, diff), out=dmin)
    return log_g_func(dmin, g0)


def h_k(betas, kernel: RepulsionKernel) -> float:
    """``min`` over unordered pairs of ``G(d(b_k, b_k'))``; one for fewer than two vectors."""
    betas = [np.asarray(b, dtype=float) for b in betas]
    if len(betas) < 2 or not kernel.active:
        if kernel.dim is not None:
            for b in betas:
                if b.shape != (kernel.dim,):
                    raise DimensionMismatchError(f"vector length {b.shape} != {kernel.dim}")
        return 1.0
    shapes = {b.shape for b in betas}
    if len(shapes) != 1 or betas[0].ndim != 1:
        raise DimensionMismatchError(f"inconsistent vector shapes {shapes}")
    coords = kernel.coords(np.stack(betas))
    return float(np.exp(pairwise_log_h(coords, kernel.g0)))


def whiten(beta, dataset: Dataset, g: float) -> np.ndarray:
    """Map ``beta`` to ``L^T beta / sqrt(g)`` where ``X^T X = L L^T``.

    Squared Euclidean distances between whitened vectors equal the
    Mahalanobis ``pair_distance``, and the g-prior becomes isotropic.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape[-1] != dataset.p:
        raise DimensionMismatchError(f"beta has length {beta.shape[-1]}, design has p={dataset.p}")
    return beta @ dataset.gram_chol / np.sqrt(g)
