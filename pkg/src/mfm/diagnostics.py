"""Ground-truth oracles and chain sanity instruments.

- exact_posterior_k: the posterior over partitions and over the component
  count by complete enumeration of set partitions (restricted-growth strings,
  N <= 10), against which sampler output is checked.
- mc_kl_estimate: Monte Carlo KL divergence between generator densities.
- chain_stats: split-merge acceptance rate and integrated autocorrelation
  time of the cluster-count trace.
- rao_blackwell_posterior_k: the analytic-mixing alternative to histogramming
  sampled k values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import ChainOutput
from .coefficients import build_coefficient_table, posterior_k_given_partition
from .model import ModelConfig, SuffStats, cluster_log_marginal
from .priors import CountPrior

__all__ = [
    "ExactPosterior",
    "SupportViolationError",
    "exact_posterior_k",
    "mc_kl_estimate",
    "chain_stats",
    "rao_blackwell_posterior_k",
]

MAX_EXACT_N = 10
NEG_INF = float("-inf")


class SupportViolationError(ValueError):
    """A KL draw from f0 landed where f has zero density (KL is infinite)."""


@dataclass(frozen=True)
class ExactPosterior:
    """Enumeration result: every partition with its normalized log weight."""

    partitions: list[tuple[tuple[int, ...], float]]
    posterior_k: np.ndarray  # posterior_k[i] = P(k = i+1 | data)
    posterior_t: np.ndarray  # posterior_t[i] = P(t = i+1 | data)


def _subset_log_marginals(data: np.ndarray, cfg: ModelConfig, beta: float) -> np.ndarray:
    """Cluster log marginal for every nonempty member bitmask."""
    n = data.shape[0]
    out = np.zeros(1 << n)
    for mask in range(1, 1 << n):
        rows = data[[i for i in range(n) if mask >> i & 1]]
        s = SuffStats(rows.shape[0], rows.sum(axis=0), (rows * rows).sum(axis=0))
        out[mask] = cluster_log_marginal(s, cfg, beta)
    return out


def _iter_rgs(n: int):
    """Restricted growth strings of length n: a[0]=0, a[i] <= max(a[:i]) + 1."""
    a = [0] * n
    mx = [0] * n  # mx[i] = max(a[:i+1])
    while True:
        yield a
        i = n - 1
        while i > 0 and a[i] == mx[i - 1] + 1:
            i -= 1
        if i == 0:
            return
        a[i] += 1
        mx[i] = a[i] if a[i] > mx[i - 1] else mx[i - 1]
        for j in range(i + 1, n):
            a[j] = 0
            mx[j] = mx[j - 1]


def exact_posterior_k(data: np.ndarray, cfg: ModelConfig, beta: float) -> ExactPosterior:
    """Posterior over k (and t, and partitions) by complete enumeration."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n = data.shape[0]
    if n > MAX_EXACT_N:
        raise ValueError(f"enumeration supports N <= {MAX_EXACT_N}, got {n}")
    if data.shape[1] != cfg.dim:
        raise ValueError("data dimension does not match config")
    table = build_coefficient_table(cfg.count_prior, cfg.gamma, n)
    lgam_rise = np.array(
        [math.lgamma(cfg.gamma + m) - math.lgamma(cfg.gamma) for m in range(n + 1)]
    )
    sub_lm = _subset_log_marginals(data, cfg, beta)

    parts: list[tuple[tuple[int, ...], float]] = []
    logws = []
    for a in _iter_rgs(n):
        t = max(a) + 1
        logv = table.log_V(t)
        if logv == NEG_INF:  # outside the count prior's support
            parts.append((tuple(a), NEG_INF))
            logws.append(NEG_INF)
            continue
        masks = [0] * t
        for i, lab in enumerate(a):
            masks[lab] |= 1 << i
        lw = logv
        for mask in masks:
            lw += lgam_rise[mask.bit_count()] + sub_lm[mask]
        parts.append((tuple(a), lw))
        logws.append(lw)

    logws = np.asarray(logws)
    mx = logws.max()
    if mx == NEG_INF:
        raise ValueError("all partitions have zero prior weight")
    w = np.exp(logws - mx)
    log_norm = mx + math.log(float(w.sum()))
    w /= w.sum()

    post_t = np.zeros(n)
    kvecs: dict[int, np.ndarray] = {}
    klen = 0
    for (a, _), wi in zip(parts, w):
        if wi == 0.0:
            continue
        t = max(a) + 1
        post_t[t - 1] += wi
        if t not in kvecs:
            kvecs[t] = posterior_k_given_partition(cfg.count_prior, cfg.gamma, n, t)
            klen = max(klen, len(kvecs[t]))
    post_k = np.zeros(klen)
    for (a, _), wi in zip(parts, w):
        if wi == 0.0:
            continue
        vec = kvecs[max(a) + 1]
        post_k[: len(vec)] += wi * vec

    norm_parts = [
        (a, lw - log_norm if lw != NEG_INF else NEG_INF) for (a, lw) in parts
    ]
    return ExactPosterior(partitions=norm_parts, posterior_k=post_k, posterior_t=post_t)


def mc_kl_estimate(f0, f, n_samples: int, seed) -> tuple[float, float]:
    """Monte Carlo estimate of KL(f0 || f) with its standard error.

    f0 must provide draw(n, rng) -> values and logpdf(values); f must provide
    logpdf(values). A -inf under f raises SupportViolationError (the KL is
    infinite, which callers must handle explicitly).
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    rng = (
        seed
        if isinstance(seed, np.random.Generator)
        else np.random.Generator(np.random.PCG64(seed))
    )
    x = f0.draw(n_samples, rng)
    lf0 = np.asarray(f0.logpdf(x), dtype=float).reshape(-1)
    lf = np.asarray(f.logpdf(x), dtype=float).reshape(-1)
    if np.any(np.isneginf(lf)):
        raise SupportViolationError(
            "a draw from f0 has zero density under f (KL divergence is infinite)"
        )
    diff = lf0 - lf
    est = float(diff.mean())
    se = float(diff.std(ddof=1) / math.sqrt(n_samples))
    return est, se


def chain_stats(out: ChainOutput) -> tuple[float, float]:
    """(split-merge acceptance rate, integrated autocorrelation time of trace_t).

    The autocorrelation time uses the initial-positive-sequence truncation:
    sum paired autocovariances Gamma_m = gamma(2m) + gamma(2m+1) while
    positive. A constant trace has no autocorrelation time; NaN is returned.
    """
    if len(out.trace_t) == 0:
        raise ValueError("empty trace")
    rate = out.sm_accepted / out.sm_proposed if out.sm_proposed else 0.0
    x = np.asarray(out.trace_t, dtype=float)
    n = len(x)
    x = x - x.mean()
    var = float(np.dot(x, x) / n)
    if var == 0.0:
        return rate, float("nan")

    def gamma_h(h: int) -> float:
        return float(np.dot(x[: n - h], x[h:]) / n)

    iact = -1.0  # pairing below counts gamma_0 twice
    m = 0
    while 2 * m + 1 < n:
        pair = gamma_h(2 * m) + gamma_h(2 * m + 1)
        if pair <= 0.0:
            break
        iact += 2.0 * pair / var
        m += 1
    return rate, max(iact, 1.0) if m > 0 else 1.0


def rao_blackwell_posterior_k(
    trace_t: np.ndarray, prior: CountPrior, gamma: float, n: int
) -> np.ndarray:
    """Average p(k | t, n) over the recorded t trace instead of sampling k."""
    trace_t = np.asarray(trace_t, dtype=np.int64)
    if trace_t.size == 0:
        raise ValueError("empty trace")
    vecs: dict[int, np.ndarray] = {}
    klen = 0
    for t in np.unique(trace_t):
        vecs[int(t)] = posterior_k_given_partition(prior, gamma, n, int(t))
        klen = max(klen, len(vecs[int(t)]))
    out = np.zeros(klen)
    for t, cnt in zip(*np.unique(trace_t, return_counts=True)):
        vec = vecs[int(t)]
        out[: len(vec)] += (cnt / trace_t.size) * vec
    return out
