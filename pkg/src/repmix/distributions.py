"""Truncated inverse-gamma draws and the coefficient priors used by the samplers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import ConfigError, Dataset

# below this interval mass the draw is clamped to the nearer bound
MASS_FLOOR = 1e-12
REJECTION_MASS = 0.5


def truncated_invgamma(rng, shape, rate, lo, hi, size=None):
    """Inverse-gamma(shape, rate) restricted to ``[lo, hi]``.

    Works on the precision ``1 / sigma^2 ~ Gamma(shape, rate)``. Intervals
    holding most of the mass are sampled by rejection; the rest by inverting
    the regularized gamma, using the upper tail when the interval sits there
    so the CDF difference keeps its digits. Both routes are exact.

    Returns ``(draws, n_clamped)``. When the interval carries less than
    ``MASS_FLOOR`` of the distribution, draws are clamped to the bound nearer
    the mode and counted in ``n_clamped``.
    """
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    param_shape = np.broadcast(shape, rate).shape
    out_shape = param_shape if size is None else tuple(np.atleast_1d(size).tolist())
    # CDF pieces are evaluated once per distinct parameter, then broadcast
    x_lo = rate / hi  # precision bounds in Gamma(shape, 1) units
    x_hi = rate / lo
    p_lo = special.gammainc(shape, x_lo)
    p_hi = special.gammainc(shape, x_hi)
    q_lo = special.gammaincc(shape, x_lo)
    q_hi = special.gammaincc(shape, x_hi)
    use_upper = p_lo > 0.5
    mass = np.where(use_upper, q_lo - q_hi, p_hi - p_lo)
    if not shape.shape == rate.shape == out_shape:
        shape, rate, x_lo, x_hi, p_lo, p_hi, q_lo, q_hi, use_upper, mass = (
            np.broadcast_to(a, out_shape)
            for a in (shape, rate, x_lo, x_hi, p_lo, p_hi, q_lo, q_hi, use_upper, mass)
        )
    x = np.full(out_shape, np.nan)

    # high-mass intervals: exact rejection from the untruncated gamma
    todo = np.flatnonzero(mass.ravel() > REJECTION_MASS)
    xf = x.reshape(-1)
    sf, xlf, xhf = shape.reshape(-1), x_lo.reshape(-1), x_hi.reshape(-1)
    scalar = param_shape == ()
    for _ in range(64):
        if todo.size == 0:
            break
        cand = rng.gamma(float(shape.flat[0]), size=todo.size) if scalar else rng.gamma(sf[todo])
        ok = (cand >= xlf[todo]) & (cand <= xhf[todo])
        xf[todo[ok]] = cand[ok]
        todo = todo[~ok]

    rest = np.isnan(x)
    if rest.any():
        u = rng.random(int(rest.sum()))
        pl, ph, ql, qh, sh = (a[rest] for a in (p_lo, p_hi, q_lo, q_hi, shape))
        with np.errstate(all="ignore"):
            x[rest] = np.where(
                use_upper[rest],
                special.gammainccinv(sh, ql - u * (ql - qh)),
                special.gammaincinv(sh, pl + u * (ph - pl)),
            )
    x = np.clip(x, x_lo, x_hi)
    draws = rate / x
    bad = ~(mass >= MASS_FLOOR) | ~np.isfinite(draws)
    n_clamped = int(np.count_nonzero(bad))
    if n_clamped:
        mode = rate / (shape + 1.0)
        draws = np.where(bad, np.where(mode > hi, hi, lo), draws)
    draws = np.clip(draws, lo, hi)
    if draws.ndim == 0:
        return float(draws), n_clamped
    return draws, n_clamped


def truncated_invgamma_mass(shape, rate, lo, hi) -> float:
    return float(special.gammainc(shape, rate / lo) - special.gammainc(shape, rate / hi))


@dataclass(frozen=True, eq=False)
class CoefficientPrior:
    """Zero-mean normal prior on a component's coefficients.

    ``kind="g"`` is the g-prior ``N(0, g sigma^2 (X^T X)^{-1})``;
    ``kind="normal"`` is ``N(0, tau2 I)`` and ignores ``sigma^2``.
    """

    kind: str
    p: int
    g: float = 1.0
    tau2: float = 1.0
    gram: np.ndarray | None = None
    chol_inv_t: np.ndarray | None = None

    @classmethod
    def g_prior(cls, dataset: Dataset, g: float) -> CoefficientPrior:
        if not g > 0:
            raise ConfigError("g must be positive")
        return cls("g", dataset.p, g=float(g), gram=dataset.gram, chol_inv_t=dataset.gram_chol_inv_t)

    @classmethod
    def normal(cls, p: int, tau2: float) -> CoefficientPrior:
        if not tau2 > 0:
            raise ConfigError("tau2 must be positive")
        return cls("normal", p, tau2=float(tau2))

    @property
    def scales_with_sigma(self) -> bool:
        return self.kind == "g"

    @property
    def cov_factor(self) -> np.ndarray:
        """``C`` with prior covariance ``s C C^T``, ``s = sigma^2`` for the g-prior else 1."""
        if self.kind == "g":
            return np.sqrt(self.g) * self.chol_inv_t
        return np.sqrt(self.tau2) * np.eye(self.p)

    def precision(self, sigma2: float) -> np.ndarray:
        if self.kind == "g":
            return self.gram / (self.g * sigma2)
        return np.eye(self.p) / self.tau2

    def sample(self, rng, sigma2) -> np.ndarray:
        """One coefficient vector per entry of ``sigma2``; shape ``(len(sigma2), p)``."""
        sigma2 = np.atleast_1d(np.asarray(sigma2, dtype=float))
        zs = rng.standard_normal((sigma2.shape[0], self.p))
        draws = zs @ self.cov_factor.T
        if self.scales_with_sigma:
            draws *= np.sqrt(sigma2)[:, None]
        return draws

    def describe(self) -> dict:
        return {"kind": self.kind, "g": self.g, "tau2": self.tau2}
