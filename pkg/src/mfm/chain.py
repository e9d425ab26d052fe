"""Chain driver: iteration protocol, recording, and backend selection.

Each iteration runs one Gibbs sweep, then ``splitmerge_per_sweep`` split-merge
moves, then a beta update when a hyperprior is configured. Past burn-in, every
``record_every``-th iteration records (t, a draw of k given t, beta). The
posterior over k is the normalized histogram of the recorded k draws.

Two interchangeable backends execute the moves: the compiled kernel
(``mfm._kernel``, used when importable) and the pure-Python reference
(``mfm.gibbs``). They consume one PCG64 stream identically, so a chain is
bitwise reproducible from (data, configs, seed) on either backend.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .coefficients import posterior_k_given_partition
from .gibbs import PyChain
from .model import ModelConfig
from .state import PartitionState, init_partition
from .tables import ChainTables, prepare_chain_tables

try:
    from . import _kernel

    HAVE_KERNEL = True
except ImportError:  # pure-Python fallback only
    _kernel = None
    HAVE_KERNEL = False

__all__ = [
    "ChainConfig",
    "ChainOutput",
    "HAVE_KERNEL",
    "run_chain",
    "gibbs_sweep",
    "split_merge_move",
    "resample_beta",
    "draw_k_given_t",
    "make_backend",
]

PRNG_NAME = "numpy PCG64"  # pinned; traces depend on this generator


@dataclass(frozen=True)
class ChainConfig:
    iterations: int
    burn_in: int = 0
    seed: int = 0
    splitmerge_per_sweep: int = 1
    restricted_scans: int = 5
    record_every: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.splitmerge_per_sweep < 0:
            raise ValueError("splitmerge_per_sweep must be nonnegative")
        if self.restricted_scans < 1:
            raise ValueError("restricted_scans must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be positive")


@dataclass
class ChainOutput:
    trace_t: np.ndarray
    trace_k: np.ndarray
    trace_beta: np.ndarray
    sm_proposed: int
    sm_accepted: int
    posterior_k: np.ndarray  # posterior_k[i] = P(k = i+1 | data)
    wallclock: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "trace_t": self.trace_t.tolist(),
                "trace_k": self.trace_k.tolist(),
                "trace_beta": self.trace_beta.tolist(),
                "sm_proposed": self.sm_proposed,
                "sm_accepted": self.sm_accepted,
                "posterior_k": self.posterior_k.tolist(),
                "wallclock": self.wallclock,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ChainOutput":
        d = json.loads(text)
        return cls(
            trace_t=np.asarray(d["trace_t"], dtype=np.int64),
            trace_k=np.asarray(d["trace_k"], dtype=np.int64),
            trace_beta=np.asarray(d["trace_beta"], dtype=np.float64),
            sm_proposed=int(d["sm_proposed"]),
            sm_accepted=int(d["sm_accepted"]),
            posterior_k=np.asarray(d["posterior_k"], dtype=np.float64),
            wallclock=float(d["wallclock"]),
        )


def make_backend(
    name: str,
    state: PartitionState,
    data: np.ndarray,
    cfg: ModelConfig,
    tables: ChainTables,
    rng: np.random.Generator,
):
    """Instantiate a sampler backend: 'cython', 'python', or 'auto'."""
    if name == "auto":
        name = "cython" if HAVE_KERNEL else "python"
    if name == "cython":
        if not HAVE_KERNEL:
            raise RuntimeError("compiled kernel not available; build mfm._kernel")
        return _kernel.CyChain(state, data, cfg, tables, rng)
    if name == "python":
        return PyChain(state, data, cfg, tables, rng)
    raise ValueError(f"unknown backend {name!r}")


def run_chain(
    data: np.ndarray,
    cfg: ModelConfig,
    chain: ChainConfig,
    backend: str = "auto",
    audit_every: int = 0,
) -> ChainOutput:
    """Run one chain; fully deterministic given (data, cfg, chain.seed)."""
    data = np.ascontiguousarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 1:
        raise ValueError("data must be a nonempty N x D matrix")
    n = data.shape[0]
    rng = np.random.Generator(np.random.PCG64(chain.seed))
    state = init_partition(data, cfg, rng)
    tables = prepare_chain_tables(cfg, n)
    bk = make_backend(backend, state, data, cfg, tables, rng)

    hyper = cfg.beta_prior
    n_rec = (chain.iterations - chain.burn_in) // chain.record_every
    trace_t = np.zeros(n_rec, dtype=np.int64)
    trace_k = np.zeros(n_rec, dtype=np.int64)
    trace_beta = np.zeros(n_rec, dtype=np.float64)
    sm_proposed = 0
    sm_accepted = 0
    idx = 0

    start = time.perf_counter()
    for it in range(1, chain.iterations + 1):
        bk.sweep()
        if n >= 2:
            for _ in range(chain.splitmerge_per_sweep):
                sm_proposed += 1
                sm_accepted += 1 if bk.split_merge(chain.restricted_scans) else 0
        if hyper is not None:
            bk.resample_beta(hyper.u, hyper.v)
        if it > chain.burn_in and (it - chain.burn_in) % chain.record_every == 0:
            trace_t[idx] = bk.t
            trace_k[idx] = bk.draw_k()
            trace_beta[idx] = bk.beta
            idx += 1
        if audit_every and it % audit_every == 0:
            state.audit(data, cfg)
    wallclock = time.perf_counter() - start

    counts = np.bincount(trace_k, minlength=2)[1:]
    posterior_k = counts / n_rec if n_rec else counts.astype(float)
    return ChainOutput(
        trace_t=trace_t,
        trace_k=trace_k,
        trace_beta=trace_beta,
        sm_proposed=sm_proposed,
        sm_accepted=sm_accepted,
        posterior_k=posterior_k,
        wallclock=wallclock,
    )


# -- operation-level entry points (reference backend) --------------------------


def gibbs_sweep(
    state: PartitionState,
    data: np.ndarray,
    cfg: ModelConfig,
    tables: ChainTables,
    rng: np.random.Generator,
) -> PartitionState:
    """One full reassignment pass over all observations (in place)."""
    PyChain(state, data, cfg, tables, rng).sweep()
    return state


def split_merge_move(
    state: PartitionState,
    data: np.ndarray,
    cfg: ModelConfig,
    tables: ChainTables,
    rng: np.random.Generator,
    restricted_scans: int = 5,
    anchors: tuple[int, int] | None = None,
    debug: dict | None = None,
) -> bool:
    """One split-merge move (in place); True when accepted."""
    return PyChain(state, data, cfg, tables, rng).split_merge(
        restricted_scans, anchors=anchors, debug=debug
    )


def resample_beta(
    state: PartitionState,
    data: np.ndarray,
    cfg: ModelConfig,
    rng: np.random.Generator,
    tables: ChainTables | None = None,
) -> float:
    """Gibbs update of the rate beta (requires a configured hyperprior)."""
    if cfg.beta_prior is None:
        raise ValueError("resample_beta requires a beta hyperprior configuration")
    if tables is None:
        tables = prepare_chain_tables(cfg, state.n)
    return PyChain(state, data, cfg, tables, rng).resample_beta(
        cfg.beta_prior.u, cfg.beta_prior.v
    )


@lru_cache(maxsize=512)
def _k_conditional_cdf(prior, gamma: float, n: int, t: int) -> np.ndarray:
    # priors are frozen dataclasses, so the conditional is cacheable by value
    cdf = np.cumsum(posterior_k_given_partition(prior, gamma, n, t)[t - 1 :])
    cdf.flags.writeable = False
    return cdf


def draw_k_given_t(prior, gamma: float, n: int, t: int, rng: np.random.Generator) -> int:
    """One draw from p(k | t, n); always >= t."""
    cdf = _k_conditional_cdf(prior, float(gamma), int(n), int(t))
    u = rng.random()
    idx = 0
    while idx < len(cdf) - 1 and u >= cdf[idx]:
        idx += 1
    return t + idx
