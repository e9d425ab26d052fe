"""Priors on the number of mixture components.

Two families are supported: a geometric prior on k = 1, 2, ... and a uniform
prior on {1, ..., kmax}. Both expose their log pmf through ``log_prior_k``,
which returns -inf outside the support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["Geometric", "UniformBounded", "CountPrior", "log_prior_k"]

NEG_INF = float("-inf")


@dataclass(frozen=True)
class Geometric:
    """Geometric prior on k: mass r*(1-r)**(k-1) for k = 1, 2, ..."""

    r: float

    def __post_init__(self):
        if not 0.0 < self.r < 1.0:
            raise ValueError(f"geometric parameter r must be in (0,1), got {self.r}")

    # support is unbounded
    support_max = None

    def log_pmf(self, k: int) -> float:
        if k < 1:
            return NEG_INF
        return math.log(self.r) + (k - 1) * math.log1p(-self.r)


@dataclass(frozen=True)
class UniformBounded:
    """Uniform prior on k in {1, ..., kmax}: mass 1/kmax inside the support."""

    kmax: int

    def __post_init__(self):
        if self.kmax < 1:
            raise ValueError(f"kmax must be a positive integer, got {self.kmax}")

    @property
    def support_max(self) -> int:
        return self.kmax

    def log_pmf(self, k: int) -> float:
        if k < 1 or k > self.kmax:
            return NEG_INF
        return -math.log(self.kmax)


CountPrior = Geometric | UniformBounded


def log_prior_k(prior: CountPrior, k: int) -> float:
    """Log prior mass of the component count k; -inf outside the support."""
    if k < 1:
        raise ValueError(f"component count k must be >= 1, got {k}")
    return prior.log_pmf(k)
