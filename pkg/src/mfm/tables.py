"""Precomputed lookup tables for the sampler's hot loops.

Everything here is a deterministic function of (model config, sample size),
computed once in Python so the compiled and pure-Python backends read exactly
the same float64 values:

- ``logv``: log V_n(t) from the coefficient table,
- ``kcdf``: per-t inverse-CDF rows of p(k | t, n) for the recorded k draws,
- ``const_nd``: the (n, d)-dependent constants of the cluster log marginal,
- ``log_n_gamma``: log(m + gamma) urn factors,
- ``lgam_rise``: log rising factorials logGamma(gamma+m) - logGamma(gamma).

Capacity grows lazily: when a chain is about to need log V_n(t+1) beyond the
current table, ``ensure_capacity`` rebuilds the arrays (never in the middle of
a weight computation, and without consuming randomness, so backends stay in
lockstep).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import (
    CoefficientTable,
    build_coefficient_table,
    posterior_k_given_partition,
)
from .model import LOG_2PI, ModelConfig

__all__ = ["ChainTables", "prepare_chain_tables"]


@dataclass
class ChainTables:
    cfg: ModelConfig
    n: int
    coeffs: CoefficientTable
    logv: np.ndarray = field(repr=False)
    t_cap: int
    t_rows: int
    kcdf_off: np.ndarray = field(repr=False)
    kcdf: np.ndarray = field(repr=False)
    const_nd: np.ndarray = field(repr=False)
    log_n_gamma: np.ndarray = field(repr=False)
    lgam_rise: np.ndarray = field(repr=False)
    log_gamma: float

    def ensure_capacity(self, t_needed: int) -> bool:
        """Make log V_n(t) available for all t <= t_needed; True if rebuilt."""
        if t_needed <= self.t_cap:
            return False
        self.coeffs.extend(max(t_needed, min(2 * self.t_cap, self.n)))
        self.logv = self.coeffs.logv
        self.t_cap = self.coeffs.hi
        if self.t_cap < t_needed:
            raise RuntimeError(
                f"cannot extend coefficient table to t={t_needed} (n={self.n})"
            )
        self.t_rows, self.kcdf_off, self.kcdf = _build_kcdf(
            self.cfg, self.n, self.t_cap
        )
        return True


def _build_kcdf(cfg: ModelConfig, n: int, t_cap: int):
    """Ragged per-t rows of cumulative p(k | t, n); row t starts at k = t."""
    kmax = cfg.count_prior.support_max
    t_rows = min(t_cap, n) if kmax is None else min(t_cap, n, kmax)
    rows = []
    for t in range(1, t_rows + 1):
        probs = posterior_k_given_partition(cfg.count_prior, cfg.gamma, n, t)
        rows.append(np.cumsum(probs[t - 1 :]))
    off = np.zeros(t_rows + 2, dtype=np.int64)
    for t in range(1, t_rows + 1):
        off[t + 1] = off[t] + len(rows[t - 1])
    flat = np.concatenate(rows) if rows else np.zeros(0)
    return t_rows, off, np.ascontiguousarray(flat, dtype=np.float64)


def prepare_chain_tables(cfg: ModelConfig, n: int, t_max: int | None = None) -> ChainTables:
    coeffs = build_coefficient_table(cfg.count_prior, cfg.gamma, n, t_max=t_max)

    # const_nd[nn, d]: beta-independent part of the 1-D cluster log marginal
    nn = np.arange(n + 1, dtype=np.float64)[:, None]
    c = cfg.c[None, :]
    const_nd = (
        -0.5 * nn * LOG_2PI
        + 0.5 * np.log(c / (c + nn))
        + _lgamma_vec(cfg.alpha + 0.5 * nn[:, 0])[:, None]
        - math.lgamma(cfg.alpha)
    )
    const_nd[0, :] = 0.0

    mm = np.arange(n + 2, dtype=np.float64)
    log_n_gamma = np.log(mm[: n + 1] + cfg.gamma)
    lgam_rise = _lgamma_vec(cfg.gamma + mm) - math.lgamma(cfg.gamma)

    t_rows, kcdf_off, kcdf = _build_kcdf(cfg, n, coeffs.hi)
    return ChainTables(
        cfg=cfg,
        n=n,
        coeffs=coeffs,
        logv=coeffs.logv,
        t_cap=coeffs.hi,
        t_rows=t_rows,
        kcdf_off=kcdf_off,
        kcdf=kcdf,
        const_nd=np.ascontiguousarray(const_nd),
        log_n_gamma=np.ascontiguousarray(log_n_gamma),
        lgam_rise=np.ascontiguousarray(lgam_rise),
        log_gamma=math.log(cfg.gamma),
    )


def _lgamma_vec(x: np.ndarray) -> np.ndarray:
    # math.lgamma element-wise; the table is small, built once
    return np.array([math.lgamma(v) for v in np.atleast_1d(x)])
