"""Mutable partition state for the collapsed sampler.

The state is a struct-of-arrays over cluster slots 0..t-1 so the compiled and
pure-Python sampler backends can operate on the same memory:

- ``z[i]`` holds a stable cluster id (not a slot); ``id_to_slot``/``slot_to_id``
  map between ids and the compact slot range. Ids come from a free-list that is
  refilled between sampler phases, so an id freed mid-sweep is not handed out
  again within that sweep.
- per slot: member count, per-dimension sum and sum of squares, and a cached
  cluster log marginal under the currently active beta.

Cluster deletion swaps the last slot into the hole (O(1)); creation appends at
slot t. Slot order is therefore deterministic given the operation sequence,
which the backend-equality tests rely on.
"""

from __future__ import annotations

import math

import numpy as np

from .model import ModelConfig, SuffStats, cluster_log_marginal

__all__ = ["PartitionState", "init_partition"]


class PartitionState:
    """Cluster assignments plus per-cluster sufficient statistics."""

    def __init__(self, data: np.ndarray, cfg: ModelConfig, beta: float):
        n, dim = data.shape
        if dim != cfg.dim:
            raise ValueError(f"data has dim {dim}, config expects {cfg.dim}")
        self.n = n
        self.dim = dim
        idcap = 2 * n + 4
        self.z = np.zeros(n, dtype=np.int64)
        self.id_to_slot = np.full(idcap, -1, dtype=np.int64)
        self.slot_to_id = np.full(n + 1, -1, dtype=np.int64)
        self.counts = np.zeros(n + 1, dtype=np.int64)
        self.sums = np.zeros((n + 1, dim), dtype=np.float64)
        self.sumsqs = np.zeros((n + 1, dim), dtype=np.float64)
        self.logmargs = np.zeros(n + 1, dtype=np.float64)
        self.free_ids = np.zeros(idcap, dtype=np.int64)
        # misc_i = [t, free_top]; misc_f = [beta, log(beta)] — kept in arrays
        # so compiled code mutates them in place and this object stays current.
        self.misc_i = np.zeros(2, dtype=np.int64)
        self.misc_f = np.array([beta, math.log(beta)], dtype=np.float64)

    # -- public view ---------------------------------------------------------

    @property
    def t(self) -> int:
        return int(self.misc_i[0])

    @property
    def beta(self) -> float:
        return float(self.misc_f[0])

    @property
    def clusters(self) -> dict[int, SuffStats]:
        out = {}
        for slot in range(self.t):
            cid = int(self.slot_to_id[slot])
            out[cid] = SuffStats(
                int(self.counts[slot]),
                self.sums[slot].copy(),
                self.sumsqs[slot].copy(),
            )
        return out

    @property
    def assignments(self) -> np.ndarray:
        return self.z.copy()

    def partition_key(self) -> tuple:
        """Canonical label-free encoding (blocks ordered by first member)."""
        first_seen: dict[int, int] = {}
        canon = []
        for cid in self.z:
            canon.append(first_seen.setdefault(int(cid), len(first_seen)))
        return tuple(canon)

    # -- construction --------------------------------------------------------

    @classmethod
    def from_labels(
        cls, data: np.ndarray, labels, cfg: ModelConfig, beta: float
    ) -> "PartitionState":
        """Build a state with the given cluster labels (tests and tools)."""
        data = np.ascontiguousarray(data, dtype=np.float64)
        labels = np.asarray(labels)
        state = cls(data, cfg, beta)
        uniq = []
        seen: dict = {}
        for lab in labels:
            key = lab.item() if hasattr(lab, "item") else lab
            if key not in seen:
                seen[key] = len(uniq)
                uniq.append(key)
        t = len(uniq)
        for i, lab in enumerate(labels):
            key = lab.item() if hasattr(lab, "item") else lab
            slot = seen[key]
            state.z[i] = slot  # id == slot at construction
            state.counts[slot] += 1
            state.sums[slot] += data[i]
            state.sumsqs[slot] += data[i] * data[i]
        for slot in range(t):
            state.slot_to_id[slot] = slot
            state.id_to_slot[slot] = slot
            s = SuffStats(
                int(state.counts[slot]), state.sums[slot], state.sumsqs[slot]
            )
            state.logmargs[slot] = cluster_log_marginal(s, cfg, beta)
        state.misc_i[0] = t
        state.refill_free_ids()
        return state

    def refill_free_ids(self) -> None:
        """Rebuild the free-list from unused ids, popping in ascending order."""
        free = np.where(self.id_to_slot < 0)[0][::-1]
        self.free_ids[: len(free)] = free
        self.misc_i[1] = len(free)

    # -- integrity audit ------------------------------------------------------

    def audit(self, data: np.ndarray, cfg: ModelConfig, tol: float = 1e-8) -> None:
        """Verify cached statistics against a from-scratch recomputation."""
        t = self.t
        if int(self.counts[:t].sum()) != self.n:
            raise AssertionError("cluster counts do not sum to N")
        ids = set()
        for slot in range(t):
            cid = int(self.slot_to_id[slot])
            if self.id_to_slot[cid] != slot:
                raise AssertionError(f"id map inconsistent for slot {slot}")
            ids.add(cid)
        if set(int(i) for i in self.z) != ids:
            raise AssertionError("assignment ids do not match occupied clusters")
        for slot in range(t):
            members = self.z == self.slot_to_id[slot]
            rows = data[members]
            if rows.shape[0] != self.counts[slot]:
                raise AssertionError(f"slot {slot} count mismatch")
            if not np.allclose(rows.sum(axis=0), self.sums[slot], atol=tol, rtol=0):
                raise AssertionError(f"slot {slot} sum drift exceeds {tol}")
            if not np.allclose(
                (rows * rows).sum(axis=0), self.sumsqs[slot], atol=tol, rtol=0
            ):
                raise AssertionError(f"slot {slot} sumsq drift exceeds {tol}")
            s = SuffStats(rows.shape[0], rows.sum(axis=0), (rows * rows).sum(axis=0))
            want = cluster_log_marginal(s, cfg, self.beta)
            if not math.isclose(want, float(self.logmargs[slot]), rel_tol=0, abs_tol=1e-6):
                raise AssertionError(f"slot {slot} cached log marginal drift")


def init_partition(
    data: np.ndarray, cfg: ModelConfig, seed: int | np.random.Generator
) -> PartitionState:
    """All observations in one cluster; beta fixed or drawn from its hyperprior."""
    data = np.ascontiguousarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 1:
        raise ValueError("data must be a nonempty N x D matrix")
    rng = (
        seed
        if isinstance(seed, np.random.Generator)
        else np.random.Generator(np.random.PCG64(seed))
    )
    if cfg.beta is not None:
        beta = cfg.beta
    else:
        beta = float(rng.standard_gamma(cfg.beta_prior.u)) / cfg.beta_prior.v
    return PartitionState.from_labels(data, np.zeros(data.shape[0], dtype=int), cfg, beta)
