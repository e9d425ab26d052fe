"""Partition-prior coefficients V_n(t) for mixtures with a random component count.

A prior p(k) on the number of components induces an exchangeable partition
prior whose coefficients are

    V_n(t) = sum_{k >= t} k_(t) / (gamma*k)^(n) * p(k),

where k_(t) = k(k-1)...(k-t+1) is a falling factorial and
(x)^(n) = x(x+1)...(x+n-1) a rising factorial. The same series, normalized
over k at fixed t, is the conditional posterior of the component count given
a partition with t occupied clusters:

    p(k | t, n) proportional to p(k) * k_(t) / (gamma*k)^(n).

All sums are accumulated in log space with a running max shift. Unbounded
(geometric) series are truncated once a geometric bound on the remaining tail
falls below ``tol`` relative mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .priors import NEG_INF, CountPrior, Geometric, UniformBounded

__all__ = [
    "CoefficientTable",
    "SeriesTruncationError",
    "build_coefficient_table",
    "log_V_ratio",
    "posterior_k_given_partition",
]

# Hard cap on series terms; hitting it signals a pathological prior/tol pair.
SERIES_CAP = 10_000_000

DEFAULT_TOL = 1e-12
DEFAULT_T_MAX = 100


class SeriesTruncationError(RuntimeError):
    """The coefficient series did not reach the truncation tolerance in time."""


def _log_falling(k: int, t: int) -> float:
    # log k_(t) for k >= t >= 0
    return math.lgamma(k + 1) - math.lgamma(k - t + 1)


def _log_rising(x: float, n: int) -> float:
    # log (x)^(n) = log Gamma(x+n) - log Gamma(x) for x > 0
    return math.lgamma(x + n) - math.lgamma(x)


def _log_term(prior: CountPrior, gamma: float, n: int, t: int, k: int) -> float:
    lp = prior.log_pmf(k)
    if lp == NEG_INF:
        return NEG_INF
    return _log_falling(k, t) - _log_rising(gamma * k, n) + lp


class _LogSum:
    """Running log-sum-exp accumulator with max shift."""

    __slots__ = ("mx", "s")

    def __init__(self):
        self.mx = NEG_INF
        self.s = 0.0

    def add(self, term: float) -> None:
        if term == NEG_INF:
            return
        if term > self.mx:
            if self.s:
                self.s = self.s * math.exp(self.mx - term) + 1.0
            else:
                self.s = 1.0
            self.mx = term
        else:
            self.s += math.exp(term - self.mx)

    def value(self) -> float:
        if self.s == 0.0:
            return NEG_INF
        return self.mx + math.log(self.s)


def _log_v_geometric(prior: Geometric, gamma: float, n: int, t: int, tol: float) -> float:
    """log V_n(t) for a geometric prior, truncated by a geometric tail bound.

    For k+1 > t/r the term ratio is bounded by
    rho(k) = (1-r)*(k+1)/(k+1-t) < 1, so the tail beyond k is at most
    term(k) * rho/(1-rho).
    """
    acc = _LogSum()
    log_tol = math.log(tol)
    r = prior.r
    for k in range(t, t + SERIES_CAP):
        term = _log_term(prior, gamma, n, t, k)
        acc.add(term)
        rho = (1.0 - r) * (k + 1) / (k + 1 - t)
        if rho < 1.0:
            log_tail = term + math.log(rho / (1.0 - rho))
            if log_tail < log_tol + acc.value():
                return acc.value()
    raise SeriesTruncationError(
        f"coefficient series for t={t}, n={n}, gamma={gamma} did not meet "
        f"tol={tol} within {SERIES_CAP} terms"
    )


def _log_v_bounded(prior: UniformBounded, gamma: float, n: int, t: int) -> float:
    # exact finite sum over the support; -inf when t exceeds kmax
    acc = _LogSum()
    for k in range(t, prior.kmax + 1):
        acc.add(_log_term(prior, gamma, n, t, k))
    return acc.value()


def _log_v(prior: CountPrior, gamma: float, n: int, t: int, tol: float) -> float:
    if isinstance(prior, UniformBounded):
        return _log_v_bounded(prior, gamma, n, t)
    return _log_v_geometric(prior, gamma, n, t, tol)


@dataclass
class CoefficientTable:
    """Precomputed log V_n(t) values for one sample size n.

    ``logv[t]`` is valid for 1 <= t <= hi; index 0 is unused. For a bounded
    prior the table is exact: entries above kmax are -inf and ``hi`` includes
    one -inf sentinel slot when it fits. For a geometric prior the table
    covers t <= hi and extends lazily via :meth:`extend`.
    """

    n: int
    gamma: float
    prior: CountPrior
    tol: float
    logv: np.ndarray = field(repr=False)
    hi: int

    def log_V(self, t: int) -> float:
        if t < 1:
            raise ValueError(f"t must be >= 1, got {t}")
        kmax = self.prior.support_max
        if kmax is not None and t > kmax:
            return NEG_INF
        if t > self.hi:
            raise IndexError(
                f"coefficient table built to t={self.hi}, asked for t={t}; extend first"
            )
        return float(self.logv[t])

    def extend(self, new_hi: int) -> None:
        """Grow the table so log_V(t) is available for all t <= new_hi."""
        new_hi = min(new_hi, self.n if self.prior.support_max is None else self.hi)
        if new_hi <= self.hi:
            return
        grown = np.full(new_hi + 1, np.nan)
        grown[: self.hi + 1] = self.logv[: self.hi + 1]
        for t in range(self.hi + 1, new_hi + 1):
            grown[t] = _log_v(self.prior, self.gamma, self.n, t, self.tol)
        self.logv = grown
        self.hi = new_hi


def build_coefficient_table(
    prior: CountPrior,
    gamma: float,
    n: int,
    t_max: int | None = None,
    tol: float = DEFAULT_TOL,
) -> CoefficientTable:
    """Build log V_n(t) for t = 1..t_max (bounded priors: exact support)."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")

    if t_max is not None and t_max > n:
        raise ValueError(f"t_max={t_max} exceeds n={n}")

    kmax = prior.support_max
    if kmax is not None:
        # Exact: finite entries up to min(kmax, n); one -inf sentinel above
        # kmax so new-cluster weights at t = kmax evaluate to -inf.
        hi = min(kmax, n)
        if hi == kmax:
            hi += 1
    else:
        hi = min(t_max if t_max is not None else DEFAULT_T_MAX, n)

    logv = np.full(hi + 1, np.nan)
    for t in range(1, hi + 1):
        logv[t] = _log_v(prior, gamma, n, t, tol)
    return CoefficientTable(n=n, gamma=gamma, prior=prior, tol=tol, logv=logv, hi=hi)


def log_V_ratio(table: CoefficientTable, t: int) -> float:
    """log V_n(t+1) - log V_n(t): the new-cluster factor in the urn weights."""
    vt = table.log_V(t)
    if vt == NEG_INF:
        raise ValueError(f"log V_n({t}) = -inf: state outside the prior's support")
    vt1 = table.log_V(t + 1)
    if vt1 == NEG_INF:
        return NEG_INF
    return vt1 - vt


def posterior_k_given_partition(
    prior: CountPrior,
    gamma: float,
    n: int,
    t: int,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """Posterior pmf of the component count k given t occupied clusters.

    Returns a vector p with p[k-1] = P(k | t, n), support on k >= t,
    truncated where cumulative mass exceeds 1 - tol and renormalized.
    """
    if not 1 <= t <= n:
        raise ValueError(f"need 1 <= t <= n, got t={t}, n={n}")
    kmax = prior.support_max
    if kmax is not None and t > kmax:
        raise ValueError(f"t={t} exceeds the prior support max {kmax}")

    log_terms: list[float] = []
    acc = _LogSum()
    if kmax is not None:
        for k in range(t, kmax + 1):
            term = _log_term(prior, gamma, n, t, k)
            log_terms.append(term)
            acc.add(term)
    else:
        r = prior.r
        log_tol = math.log(tol)
        for k in range(t, t + SERIES_CAP):
            term = _log_term(prior, gamma, n, t, k)
            log_terms.append(term)
            acc.add(term)
            rho = (1.0 - r) * (k + 1) / (k + 1 - t)
            if rho < 1.0 and term + math.log(rho / (1.0 - rho)) < log_tol + acc.value():
                break
        else:
            raise SeriesTruncationError(
                f"posterior series for t={t}, n={n} did not meet tol={tol}"
            )

    total = acc.value()
    if total == NEG_INF:
        raise ValueError(f"posterior over k has zero normalizer at t={t}")

    probs = np.exp(np.asarray(log_terms) - total)
    # truncate where cumulative mass exceeds 1 - tol, then renormalize; rounding
    # can leave cum[-1] just short of 1 - tol (lgamma error ~ n * eps), so cap
    cum = np.cumsum(probs)
    keep = min(int(np.searchsorted(cum, 1.0 - tol, side="left")) + 1, len(probs))
    probs = probs[:keep]
    probs /= probs.sum()

    out = np.zeros(t - 1 + keep)
    out[t - 1 :] = probs
    return out
