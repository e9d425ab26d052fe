"""Pure-Python sampler backend: collapsed Gibbs sweeps, split-merge moves,
beta resampling, and the recorded component-count draw.

This is the reference implementation; ``mfm._kernel`` is a compiled
transliteration of the same operation sequence. Both consume one PCG64
stream through the same distribution functions and perform the same float64
arithmetic in the same order, so their traces are bitwise identical — the
backend-equality tests assert exactly that. Keep any change to draw order or
arithmetic grouping in sync with the kernel.

Urn weights for reassigning observation i with t clusters occupied (after
removing i):

    existing cluster c: log(n_c + gamma) + log predictive(x_i | c),
    new cluster:        log(gamma) + log V_n(t+1) - log V_n(t)
                        + log predictive(x_i | empty).

Split-merge follows the conjugate two-anchor scheme: a launch state assigns
the anchors' co-members uniformly, ``restricted_scans`` restricted Gibbs
passes refine it, the last pass accumulating the proposal density (split) or
evaluating the density of reproducing the current clusters (merge). The
Metropolis-Hastings ratio combines the partition-prior change
(V_n ratio and rising-factorial terms) with the marginal-likelihood change
and the proposal density.
"""

from __future__ import annotations

import math

import numpy as np

from .model import ModelConfig
from .state import PartitionState
from .tables import ChainTables

__all__ = ["PyChain"]

NEG_INF = float("-inf")


class PyChain:
    """One chain's sampler operations over a shared PartitionState."""

    def __init__(
        self,
        state: PartitionState,
        data: np.ndarray,
        cfg: ModelConfig,
        tables: ChainTables,
        rng: np.random.Generator,
    ):
        if data.shape != (state.n, state.dim):
            raise ValueError("data shape does not match state")
        self.state = state
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.cfg = cfg
        self.tables = tables
        self.rng = rng
        self.n = state.n
        self.dim = state.dim
        self.alpha = cfg.alpha
        self.m = cfg.m
        self.c = cfg.c
        # scratch buffers sized once
        self._w = np.zeros(state.n + 2)
        self._cum = np.zeros(state.n + 2)
        self._cand_lm = np.zeros(state.n + 2)
        self._members = np.zeros(state.n, dtype=np.int64)
        self._side = np.zeros(state.n, dtype=np.int8)
        self._zeros = np.zeros(state.dim)
        self.refresh_cached_marginals()

    # -- cached-beta marginal evaluation --------------------------------------

    def _marg(self, nn: int, sums, sumsqs, extra_row=None) -> float:
        """Cluster log marginal from raw stats, optionally with one extra row."""
        st = self.state
        if extra_row is None:
            if nn == 0:
                return 0.0
            const = self.tables.const_nd
            beta = st.misc_f[0]
            log_beta = st.misc_f[1]
            acc = 0.0
            for d in range(self.dim):
                sx = sums[d]
                sxx = sumsqs[d]
                cd = self.c[d]
                mean = sx / nn
                ssd = sxx - sx * mean
                if ssd < 0.0:
                    ssd = 0.0
                dev = mean - self.m[d]
                bn = beta + 0.5 * ssd + (cd * nn * dev * dev) / (2.0 * (cd + nn))
                acc += const[nn, d] + self.alpha * log_beta - (self.alpha + 0.5 * nn) * math.log(bn)
            return acc
        x = extra_row
        n1 = nn + 1
        const = self.tables.const_nd
        beta = st.misc_f[0]
        log_beta = st.misc_f[1]
        acc = 0.0
        for d in range(self.dim):
            sx = sums[d] + x[d]
            sxx = sumsqs[d] + x[d] * x[d]
            cd = self.c[d]
            mean = sx / n1
            ssd = sxx - sx * mean
            if ssd < 0.0:
                ssd = 0.0
            dev = mean - self.m[d]
            bn = beta + 0.5 * ssd + (cd * n1 * dev * dev) / (2.0 * (cd + n1))
            acc += const[n1, d] + self.alpha * log_beta - (self.alpha + 0.5 * n1) * math.log(bn)
        return acc

    def _marg_slot(self, slot: int) -> float:
        st = self.state
        return self._marg(int(st.counts[slot]), st.sums[slot], st.sumsqs[slot])

    def refresh_cached_marginals(self) -> None:
        st = self.state
        for slot in range(st.t):
            st.logmargs[slot] = self._marg_slot(slot)

    # -- state surgery ---------------------------------------------------------

    def _remove(self, i: int) -> None:
        """Detach observation i; delete its cluster if emptied (swap-remove)."""
        st = self.state
        x = self.data[i]
        cid = int(st.z[i])
        slot = int(st.id_to_slot[cid])
        st.counts[slot] -= 1
        st.sums[slot] -= x
        st.sumsqs[slot] -= x * x
        if st.counts[slot] == 0:
            st.id_to_slot[cid] = -1
            last = int(st.misc_i[0]) - 1
            if slot != last:
                st.counts[slot] = st.counts[last]
                st.sums[slot] = st.sums[last]
                st.sumsqs[slot] = st.sumsqs[last]
                st.logmargs[slot] = st.logmargs[last]
                moved = int(st.slot_to_id[last])
                st.slot_to_id[slot] = moved
                st.id_to_slot[moved] = slot
            st.slot_to_id[last] = -1
            st.misc_i[0] = last
        else:
            st.logmargs[slot] = self._marg_slot(slot)

    def _add_existing(self, i: int, slot: int, new_lm: float) -> None:
        st = self.state
        x = self.data[i]
        st.z[i] = st.slot_to_id[slot]
        st.counts[slot] += 1
        st.sums[slot] += x
        st.sumsqs[slot] += x * x
        st.logmargs[slot] = new_lm

    def _pop_id(self) -> int:
        st = self.state
        top = int(st.misc_i[1]) - 1
        if top < 0:
            raise RuntimeError("cluster id free-list exhausted")
        st.misc_i[1] = top
        return int(st.free_ids[top])

    def _add_new(self, i: int, lm_single: float) -> None:
        st = self.state
        x = self.data[i]
        cid = self._pop_id()
        slot = int(st.misc_i[0])
        st.slot_to_id[slot] = cid
        st.id_to_slot[cid] = slot
        st.counts[slot] = 1
        st.sums[slot] = x
        st.sumsqs[slot] = x * x
        st.logmargs[slot] = lm_single
        st.z[i] = cid
        st.misc_i[0] = slot + 1

    # -- Gibbs sweep -----------------------------------------------------------

    def reassign(self, i: int) -> None:
        """One urn-weight reassignment of observation i."""
        st = self.state
        tab = self.tables
        x = self.data[i]
        self._remove(i)
        t = int(st.misc_i[0])
        if t + 1 > tab.t_cap:
            tab.ensure_capacity(t + 1)

        w = self._w
        cand = self._cand_lm
        wmax = NEG_INF
        for slot in range(t):
            lm1 = self._marg(int(st.counts[slot]), st.sums[slot], st.sumsqs[slot], x)
            cand[slot] = lm1
            wj = tab.log_n_gamma[st.counts[slot]] + (lm1 - st.logmargs[slot])
            w[slot] = wj
            if wj > wmax:
                wmax = wj
        lm_single = self._marg(0, self._zeros, self._zeros, x)
        cand[t] = lm_single
        if t == 0:
            w_new = 0.0
        else:
            lv1 = tab.logv[t + 1]
            w_new = (
                NEG_INF
                if lv1 == NEG_INF
                else tab.log_gamma + (lv1 - tab.logv[t]) + lm_single
            )
        w[t] = w_new
        if w_new > wmax:
            wmax = w_new
        if wmax == NEG_INF:
            raise RuntimeError("all reassignment weights are -inf")

        cum = self._cum
        s = 0.0
        for j in range(t + 1):
            if w[j] == NEG_INF:
                cum[j] = s
                continue
            s += math.exp(w[j] - wmax)
            cum[j] = s
        u = self.rng.random()
        thr = u * s
        choice = 0
        while choice < t and thr >= cum[choice]:
            choice += 1
        if choice < t:
            self._add_existing(i, choice, cand[choice])
        else:
            self._add_new(i, lm_single)

    def sweep(self) -> None:
        self.state.refill_free_ids()
        for i in range(self.n):
            self.reassign(i)

    # -- split-merge -----------------------------------------------------------

    def _collect_members(self, cid_a: int, cid_b: int, i: int, j: int) -> int:
        """Indices (ascending) in clusters a/b excluding the anchors."""
        st = self.state
        z = st.z
        k = 0
        members = self._members
        for idx in range(self.n):
            if idx == i or idx == j:
                continue
            c = z[idx]
            if c == cid_a or c == cid_b:
                members[k] = idx
                k += 1
        return k

    def _scan(
        self,
        n_s: int,
        stats_a,
        stats_b,
        sample: bool,
        accumulate: bool,
        target_a_cid: int | None,
    ) -> float:
        """One restricted Gibbs pass over the co-members.

        ``sample=True`` draws each assignment (consuming randomness);
        otherwise the pass walks toward the original configuration
        (``target_a_cid`` marks which cluster id maps to side A) and only
        evaluates its density. Returns the accumulated log density when
        ``accumulate`` (or evaluating), else 0.
        """
        st = self.state
        tab = self.tables
        members = self._members
        side = self._side
        (na, sa, qa, lma) = stats_a
        (nb, sb, qb, lmb) = stats_b
        log_q = 0.0
        for idx in range(n_s):
            k = int(members[idx])
            x = self.data[k]
            if side[idx] == 0:
                na[0] -= 1
                for d in range(self.dim):
                    sa[d] -= x[d]
                    qa[d] -= x[d] * x[d]
                lm_without = self._marg(int(na[0]), sa, qa)
                pred_a = lma[0] - lm_without
                lma[0] = lm_without
                lm_b_with = self._marg(int(nb[0]), sb, qb, x)
                pred_b = lm_b_with - lmb[0]
            else:
                nb[0] -= 1
                for d in range(self.dim):
                    sb[d] -= x[d]
                    qb[d] -= x[d] * x[d]
                lm_without = self._marg(int(nb[0]), sb, qb)
                pred_b = lmb[0] - lm_without
                lmb[0] = lm_without
                lm_a_with = self._marg(int(na[0]), sa, qa, x)
                pred_a = lm_a_with - lma[0]
            wa = tab.log_n_gamma[int(na[0])] + pred_a
            wb = tab.log_n_gamma[int(nb[0])] + pred_b
            mx = wa if wa > wb else wb
            ea = math.exp(wa - mx)
            eb = math.exp(wb - mx)
            ssum = ea + eb
            if sample:
                u = self.rng.random()
                to_a = u * ssum < ea
            else:
                to_a = int(st.z[k]) == target_a_cid
            if accumulate or not sample:
                chosen = ea if to_a else eb
                p = chosen / ssum
                log_q += math.log(p) if p > 0.0 else NEG_INF
            if to_a:
                side[idx] = 0
                na[0] += 1
                for d in range(self.dim):
                    sa[d] += x[d]
                    qa[d] += x[d] * x[d]
                lma[0] = self._marg(int(na[0]), sa, qa)
            else:
                side[idx] = 1
                nb[0] += 1
                for d in range(self.dim):
                    sb[d] += x[d]
                    qb[d] += x[d] * x[d]
                lmb[0] = self._marg(int(nb[0]), sb, qb)
        return log_q

    def _launch(self, i: int, j: int, n_s: int, restricted_scans: int, target_a_cid):
        """Launch state + restricted scans; returns side stats and log density."""
        members = self._members
        side = self._side
        dim = self.dim
        na = np.zeros(1, dtype=np.int64)
        nb = np.zeros(1, dtype=np.int64)
        sa = np.zeros(dim)
        qa = np.zeros(dim)
        sb = np.zeros(dim)
        qb = np.zeros(dim)
        lma = np.zeros(1)
        lmb = np.zeros(1)
        xi = self.data[i]
        xj = self.data[j]
        na[0] = 1
        nb[0] = 1
        for d in range(dim):
            sa[d] = xi[d]
            qa[d] = xi[d] * xi[d]
            sb[d] = xj[d]
            qb[d] = xj[d] * xj[d]
        for idx in range(n_s):
            k = int(members[idx])
            x = self.data[k]
            u = self.rng.random()
            if u < 0.5:
                side[idx] = 0
                na[0] += 1
                for d in range(dim):
                    sa[d] += x[d]
                    qa[d] += x[d] * x[d]
            else:
                side[idx] = 1
                nb[0] += 1
                for d in range(dim):
                    sb[d] += x[d]
                    qb[d] += x[d] * x[d]
        lma[0] = self._marg(int(na[0]), sa, qa)
        lmb[0] = self._marg(int(nb[0]), sb, qb)
        stats_a = (na, sa, qa, lma)
        stats_b = (nb, sb, qb, lmb)
        for _ in range(restricted_scans - 1):
            self._scan(n_s, stats_a, stats_b, sample=True, accumulate=False,
                       target_a_cid=None)
        if target_a_cid is None:
            log_q = self._scan(n_s, stats_a, stats_b, sample=True, accumulate=True,
                               target_a_cid=None)
        else:
            log_q = self._scan(n_s, stats_a, stats_b, sample=False, accumulate=True,
                               target_a_cid=target_a_cid)
        return stats_a, stats_b, log_q

    def _accept(self, log_ratio: float) -> bool:
        if log_ratio >= 0.0:
            self.rng.random()  # burn the decision draw to keep streams aligned
            return True
        u = self.rng.random()
        return u < math.exp(log_ratio)

    def split_merge(self, restricted_scans: int, anchors=None, debug=None) -> bool:
        """One split-merge move; True if the proposal was accepted."""
        st = self.state
        tab = self.tables
        if self.n < 2:
            return False
        st.refill_free_ids()
        if anchors is None:
            u1 = self.rng.random()
            i = int(u1 * self.n)
            u2 = self.rng.random()
            j = int(u2 * (self.n - 1))
            if j >= i:
                j += 1
        else:
            i, j = anchors
        cid_i = int(st.z[i])
        cid_j = int(st.z[j])

        if cid_i == cid_j:
            t = int(st.misc_i[0])
            if t + 1 > tab.t_cap:
                tab.ensure_capacity(t + 1)
            lv1 = tab.logv[t + 1]
            if lv1 == NEG_INF:  # prior forbids t+1 clusters: auto-reject
                if debug is not None:
                    debug["kind"] = "split"
                    debug["log_ratio"] = NEG_INF
                return False
            n_s = self._collect_members(cid_i, cid_i, i, j)
            stats_a, stats_b, log_q = self._launch(
                i, j, n_s, restricted_scans, target_a_cid=None
            )
            (na, sa, qa, lma) = stats_a
            (nb, sb, qb, lmb) = stats_b
            slot = int(st.id_to_slot[cid_i])
            n_all = int(st.counts[slot])
            log_prior = (
                (lv1 - tab.logv[t])
                + tab.lgam_rise[int(na[0])]
                + tab.lgam_rise[int(nb[0])]
                - tab.lgam_rise[n_all]
            )
            log_lik = lma[0] + lmb[0] - st.logmargs[slot]
            log_ratio = log_prior + log_lik - log_q
            if debug is not None:
                debug.update(kind="split", log_q=log_q, log_prior=log_prior,
                             log_lik=log_lik, log_ratio=log_ratio,
                             n_a=int(na[0]), n_b=int(nb[0]))
            if not self._accept(log_ratio):
                return False
            # apply: original slot keeps side A, a new cluster takes side B
            st.counts[slot] = na[0]
            st.sums[slot] = sa
            st.sumsqs[slot] = qa
            st.logmargs[slot] = lma[0]
            cid_new = self._pop_id()
            slot_new = int(st.misc_i[0])
            st.slot_to_id[slot_new] = cid_new
            st.id_to_slot[cid_new] = slot_new
            st.counts[slot_new] = nb[0]
            st.sums[slot_new] = sb
            st.sumsqs[slot_new] = qb
            st.logmargs[slot_new] = lmb[0]
            st.misc_i[0] = slot_new + 1
            st.z[j] = cid_new
            members = self._members
            side = self._side
            for idx in range(n_s):
                if side[idx] == 1:
                    st.z[members[idx]] = cid_new
            return True

        # merge: anchors in different clusters
        t = int(st.misc_i[0])
        n_s = self._collect_members(cid_i, cid_j, i, j)
        stats_a, stats_b, log_q = self._launch(
            i, j, n_s, restricted_scans, target_a_cid=cid_i
        )
        slot_a = int(st.id_to_slot[cid_i])
        slot_b = int(st.id_to_slot[cid_j])
        n_a = int(st.counts[slot_a])
        n_b = int(st.counts[slot_b])
        n_u = n_a + n_b
        su = st.sums[slot_a] + st.sums[slot_b]
        qu = st.sumsqs[slot_a] + st.sumsqs[slot_b]
        lm_merged = self._marg(n_u, su, qu)
        log_prior = (
            (tab.logv[t - 1] - tab.logv[t])
            + tab.lgam_rise[n_u]
            - tab.lgam_rise[n_a]
            - tab.lgam_rise[n_b]
        )
        log_lik = lm_merged - st.logmargs[slot_a] - st.logmargs[slot_b]
        log_ratio = log_prior + log_lik + log_q
        if debug is not None:
            debug.update(kind="merge", log_q=log_q, log_prior=log_prior,
                         log_lik=log_lik, log_ratio=log_ratio)
        if not self._accept(log_ratio):
            return False
        # apply: anchor i's cluster absorbs anchor j's
        st.counts[slot_a] = n_u
        st.sums[slot_a] = su
        st.sumsqs[slot_a] = qu
        st.logmargs[slot_a] = lm_merged
        z = st.z
        for idx in range(self.n):
            if z[idx] == cid_j:
                z[idx] = cid_i
        st.id_to_slot[cid_j] = -1
        last = t - 1
        if slot_b != last:
            st.counts[slot_b] = st.counts[last]
            st.sums[slot_b] = st.sums[last]
            st.sumsqs[slot_b] = st.sumsqs[last]
            st.logmargs[slot_b] = st.logmargs[last]
            moved = int(st.slot_to_id[last])
            st.slot_to_id[slot_b] = moved
            st.id_to_slot[moved] = slot_b
        st.slot_to_id[last] = -1
        st.misc_i[0] = last
        return True

    # -- beta update and k draw -------------------------------------------------

    def resample_beta(self, u_shape: float, v_rate: float) -> float:
        """Gibbs update of beta through instantiated cluster precisions."""
        st = self.state
        t = int(st.misc_i[0])
        beta = st.misc_f[0]
        if t == 0:
            new_beta = float(self.rng.standard_gamma(u_shape)) / v_rate
        else:
            total_tau = 0.0
            for slot in range(t):
                nn = int(st.counts[slot])
                for d in range(self.dim):
                    sx = st.sums[slot, d]
                    sxx = st.sumsqs[slot, d]
                    cd = self.c[d]
                    mean = sx / nn
                    ssd = sxx - sx * mean
                    if ssd < 0.0:
                        ssd = 0.0
                    dev = mean - self.m[d]
                    bn = beta + 0.5 * ssd + (cd * nn * dev * dev) / (2.0 * (cd + nn))
                    g = float(self.rng.standard_gamma(self.alpha + 0.5 * nn))
                    total_tau += g / bn
            shape = u_shape + t * self.dim * self.alpha
            g = float(self.rng.standard_gamma(shape))
            new_beta = g / (v_rate + total_tau)
        st.misc_f[0] = new_beta
        st.misc_f[1] = math.log(new_beta)
        self.refresh_cached_marginals()
        return new_beta

    def draw_k(self) -> int:
        """One draw of the component count k given the current t."""
        st = self.state
        tab = self.tables
        t = int(st.misc_i[0])
        if t > tab.t_rows:
            raise RuntimeError(f"no k-draw row for t={t}")
        off0 = int(tab.kcdf_off[t])
        off1 = int(tab.kcdf_off[t + 1])
        length = off1 - off0
        u = self.rng.random()
        idx = 0
        while idx < length - 1 and u >= tab.kcdf[off0 + idx]:
            idx += 1
        return t + idx

    # -- properties ---------------------------------------------------------------

    @property
    def t(self) -> int:
        return int(self.state.misc_i[0])

    @property
    def beta(self) -> float:
        return float(self.state.misc_f[0])
