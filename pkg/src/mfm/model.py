"""Conjugate Normal-Gamma component model and its collapsed marginals.

Each cluster's data are modeled per dimension as x | theta, tau ~ N(theta, 1/tau)
with a conjugate Normal-Gamma prior: tau ~ Gam(alpha, beta) (shape-rate) and
theta | tau ~ N(m, 1/(c*tau)). Integrating (theta, tau) gives the closed-form
cluster marginal

    log m(x_1..n) = -(n/2) log(2 pi) + (1/2) log(c/(c+n))
                    + logGamma(alpha + n/2) - logGamma(alpha)
                    + alpha log(beta) - (alpha + n/2) log(beta_n),

    beta_n = beta + (1/2) sum_i (x_i - xbar)^2 + c n (xbar - m)^2 / (2 (c+n)),

multiplied (summed in log space) over dimensions. The rate beta may itself be
random with a Gam(u, v) hyperprior; the marginal is always evaluated at the
currently active beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .priors import CountPrior

__all__ = [
    "BetaHyperprior",
    "ModelConfig",
    "SuffStats",
    "suffstats_add",
    "suffstats_remove",
    "cluster_log_marginal",
    "log_predictive",
    "mean_precision_scale",
]

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class BetaHyperprior:
    """Gam(u, v) hyperprior (shape-rate) on the Gamma rate beta."""

    u: float
    v: float

    def __post_init__(self):
        if self.u <= 0 or self.v <= 0:
            raise ValueError(f"hyperprior shape/rate must be positive, got {self}")

    @property
    def mean(self) -> float:
        return self.u / self.v


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters of the mixture model.

    m and c are per-dimension arrays (scalars broadcast); exactly one of
    ``beta`` (fixed rate) or ``beta_prior`` must be set.
    """

    m: np.ndarray
    c: np.ndarray
    alpha: float
    gamma: float
    count_prior: CountPrior
    dim: int
    beta: float | None = None
    beta_prior: BetaHyperprior | None = None

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.ndim == 0:
            m = np.full(self.dim, float(m))
        c = np.asarray(self.c, dtype=float)
        if c.ndim == 0:
            c = np.full(self.dim, float(c))
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "c", c)
        if m.shape != (self.dim,) or c.shape != (self.dim,):
            raise ValueError(
                f"m and c must have shape ({self.dim},), got {m.shape} and {c.shape}"
            )
        if np.any(c <= 0):
            raise ValueError("mean-precision scale c must be strictly positive")
        if self.alpha <= 0 or self.gamma <= 0:
            raise ValueError("alpha and gamma must be strictly positive")
        if (self.beta is None) == (self.beta_prior is None):
            raise ValueError("exactly one of beta and beta_prior must be set")
        if self.beta is not None and self.beta <= 0:
            raise ValueError(f"beta must be strictly positive, got {self.beta}")

    @property
    def beta_mean(self) -> float:
        """Fixed beta, or the hyperprior mean when beta is random."""
        return self.beta if self.beta is not None else self.beta_prior.mean


def mean_precision_scale(kappa, alpha: float, beta_bar: float):
    """Map a fixed prior precision kappa on theta to the scale factor c.

    The scaled family theta | tau ~ N(m, 1/(c*tau)) matches the marginal prior
    variance of theta ~ N(m, 1/kappa) when c = kappa * beta_bar / (alpha - 1)
    (alpha > 1, using E[1/tau] = beta_bar/(alpha-1)); for alpha <= 1 that
    expectation is infinite and c = kappa * beta_bar / alpha is used instead.
    """
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa <= 0):
        raise ValueError("kappa must be strictly positive")
    denom = alpha - 1.0 if alpha > 1.0 else alpha
    return kappa * beta_bar / denom


@dataclass
class SuffStats:
    """Per-cluster count, per-dimension sum and sum of squares."""

    n: int
    sum: np.ndarray
    sumsq: np.ndarray

    @classmethod
    def empty(cls, dim: int) -> "SuffStats":
        return cls(0, np.zeros(dim), np.zeros(dim))

    @classmethod
    def from_data(cls, rows: np.ndarray) -> "SuffStats":
        rows = np.atleast_2d(rows)
        return cls(rows.shape[0], rows.sum(axis=0), (rows * rows).sum(axis=0))


def suffstats_add(s: SuffStats, x: np.ndarray) -> SuffStats:
    x = np.asarray(x, dtype=float)
    return SuffStats(s.n + 1, s.sum + x, s.sumsq + x * x)


def suffstats_remove(s: SuffStats, x: np.ndarray) -> SuffStats:
    if s.n < 1:
        raise ValueError("cannot remove a point from empty sufficient statistics")
    x = np.asarray(x, dtype=float)
    return SuffStats(s.n - 1, s.sum - x, s.sumsq - x * x)


def _log_marginal_1d(
    n: int, sx: float, sxx: float, m: float, c: float, alpha: float, beta: float
) -> float:
    mean = sx / n
    ssd = sxx - sx * mean
    if ssd < 0.0:  # tiny negative from cancellation
        ssd = 0.0
    dev = mean - m
    beta_n = beta + 0.5 * ssd + (c * n * dev * dev) / (2.0 * (c + n))
    return (
        -0.5 * n * LOG_2PI
        + 0.5 * math.log(c / (c + n))
        + math.lgamma(alpha + 0.5 * n)
        - math.lgamma(alpha)
        + alpha * math.log(beta)
        - (alpha + 0.5 * n) * math.log(beta_n)
    )


def cluster_log_marginal(s: SuffStats, cfg: ModelConfig, beta: float) -> float:
    """Closed-form log marginal likelihood of one cluster's data; 0 when empty."""
    if s.n == 0:
        return 0.0
    if s.sum.shape != (cfg.dim,):
        raise ValueError(f"stats have dim {s.sum.shape}, config expects {cfg.dim}")
    total = 0.0
    for d in range(cfg.dim):
        total += _log_marginal_1d(
            s.n, float(s.sum[d]), float(s.sumsq[d]),
            float(cfg.m[d]), float(cfg.c[d]), cfg.alpha, beta,
        )
    return total


def log_predictive(s: SuffStats, x: np.ndarray, cfg: ModelConfig, beta: float) -> float:
    """log m(x appended to s) - log m(s): the posterior predictive density at x."""
    return cluster_log_marginal(suffstats_add(s, x), cfg, beta) - cluster_log_marginal(
        s, cfg, beta
    )
