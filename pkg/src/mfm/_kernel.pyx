# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled sampler backend: a transliteration of ``mfm.gibbs.PyChain``.

Every arithmetic expression keeps the reference implementation's operation
order and every random draw comes from the same PCG64 bit stream through the
same distribution functions (``next_double``, ``random_standard_gamma``), so
chains are bitwise identical across backends. All lgamma-dependent values are
read from the precomputed tables; the only libm calls in the hot loops are
log and exp, the same functions the Python math module wraps.
"""

import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, log
from libc.stdint cimport int8_t, int64_t
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_gamma

__all__ = ["CyChain"]

cdef const char *CAPSULE_NAME = "BitGenerator"
cdef double NEG_INF = float("-inf")


cdef class CyChain:
    """One chain's sampler operations over a shared PartitionState."""

    cdef public object state, cfg, tables, rng
    cdef double[:, ::1] data
    cdef Py_ssize_t n, dim
    cdef double alpha, log_gamma
    cdef double[::1] m, c
    # state views (shared memory with the PartitionState arrays)
    cdef int64_t[::1] z, id_to_slot, slot_to_id, counts, free_ids, misc_i
    cdef double[:, ::1] sums, sumsqs
    cdef double[::1] logmargs, misc_f
    # table views; logv/kcdf are rebound after ensure_capacity rebuilds them
    cdef double[::1] logv, kcdf, log_n_gamma, lgam_rise
    cdef double[:, ::1] const_nd
    cdef int64_t[::1] kcdf_off
    cdef long t_cap, t_rows
    # scratch
    cdef double[::1] w, cum, cand_lm, zeros, sa, qa, sb, qb, su, qu
    cdef int64_t[::1] members
    cdef int8_t[::1] side
    cdef long na, nb
    cdef double lma, lmb
    cdef bitgen_t *bg

    def __init__(self, state, data, cfg, tables, rng):
        data = np.ascontiguousarray(data, dtype=np.float64)
        if data.shape != (state.n, state.dim):
            raise ValueError("data shape does not match state")
        self.state = state
        self.cfg = cfg
        self.tables = tables
        self.rng = rng
        self.data = data
        self.n = state.n
        self.dim = state.dim
        self.alpha = cfg.alpha
        self.m = np.ascontiguousarray(cfg.m, dtype=np.float64)
        self.c = np.ascontiguousarray(cfg.c, dtype=np.float64)

        self.z = state.z
        self.id_to_slot = state.id_to_slot
        self.slot_to_id = state.slot_to_id
        self.counts = state.counts
        self.sums = state.sums
        self.sumsqs = state.sumsqs
        self.logmargs = state.logmargs
        self.free_ids = state.free_ids
        self.misc_i = state.misc_i
        self.misc_f = state.misc_f

        self.const_nd = tables.const_nd
        self.log_n_gamma = tables.log_n_gamma
        self.lgam_rise = tables.lgam_rise
        self.log_gamma = tables.log_gamma
        self._rebind_tables()

        self.w = np.zeros(state.n + 2)
        self.cum = np.zeros(state.n + 2)
        self.cand_lm = np.zeros(state.n + 2)
        self.members = np.zeros(state.n, dtype=np.int64)
        self.side = np.zeros(state.n, dtype=np.int8)
        self.zeros = np.zeros(state.dim)
        self.sa = np.zeros(state.dim)
        self.qa = np.zeros(state.dim)
        self.sb = np.zeros(state.dim)
        self.qb = np.zeros(state.dim)
        self.su = np.zeros(state.dim)
        self.qu = np.zeros(state.dim)

        capsule = rng.bit_generator.capsule
        self.bg = <bitgen_t *> PyCapsule_GetPointer(capsule, CAPSULE_NAME)
        self.refresh_cached_marginals()

    cdef void _rebind_tables(self):
        tab = self.tables
        self.logv = tab.logv
        self.t_cap = tab.t_cap
        self.t_rows = tab.t_rows
        self.kcdf_off = tab.kcdf_off
        self.kcdf = tab.kcdf

    cdef int _grow(self, long t_needed) except -1:
        self.tables.ensure_capacity(t_needed)
        self._rebind_tables()
        return 0

    # -- cached-beta marginal evaluation --------------------------------------

    cdef double _marg_nd(self, long nn, double *s, double *q) noexcept:
        if nn == 0:
            return 0.0
        cdef double beta = self.misc_f[0]
        cdef double log_beta = self.misc_f[1]
        cdef double acc = 0.0
        cdef Py_ssize_t d
        cdef double sx, sxx, cd, mean, ssd, dev, bn
        for d in range(self.dim):
            sx = s[d]
            sxx = q[d]
            cd = self.c[d]
            mean = sx / nn
            ssd = sxx - sx * mean
            if ssd < 0.0:
                ssd = 0.0
            dev = mean - self.m[d]
            bn = beta + 0.5 * ssd + (cd * nn * dev * dev) / (2.0 * (cd + nn))
            acc += self.const_nd[nn, d] + self.alpha * log_beta - (self.alpha + 0.5 * nn) * log(bn)
        return acc

    cdef double _marg_plus(self, long nn, double *s, double *q, double *x) noexcept:
        cdef long n1 = nn + 1
        cdef double beta = self.misc_f[0]
        cdef double log_beta = self.misc_f[1]
        cdef double acc = 0.0
        cdef Py_ssize_t d
        cdef double sx, sxx, cd, mean, ssd, dev, bn
        for d in range(self.dim):
            sx = s[d] + x[d]
            sxx = q[d] + x[d] * x[d]
            cd = self.c[d]
            mean = sx / n1
            ssd = sxx - sx * mean
            if ssd < 0.0:
                ssd = 0.0
            dev = mean - self.m[d]
            bn = beta + 0.5 * ssd + (cd * n1 * dev * dev) / (2.0 * (cd + n1))
            acc += self.const_nd[n1, d] + self.alpha * log_beta - (self.alpha + 0.5 * n1) * log(bn)
        return acc

    def refresh_cached_marginals(self):
        cdef long t = self.misc_i[0]
        cdef Py_ssize_t slot
        for slot in range(t):
            self.logmargs[slot] = self._marg_nd(
                self.counts[slot], &self.sums[slot, 0], &self.sumsqs[slot, 0]
            )

    # -- state surgery ---------------------------------------------------------

    cdef int _remove(self, Py_ssize_t i) except -1:
        cdef double *x = &self.data[i, 0]
        cdef int64_t cid = self.z[i]
        cdef Py_ssize_t slot = self.id_to_slot[cid]
        cdef Py_ssize_t d, last
        cdef int64_t moved
        self.counts[slot] -= 1
        for d in range(self.dim):
            self.sums[slot, d] -= x[d]
            self.sumsqs[slot, d] -= x[d] * x[d]
        if self.counts[slot] == 0:
            self.id_to_slot[cid] = -1
            last = self.misc_i[0] - 1
            if slot != last:
                self.counts[slot] = self.counts[last]
                for d in range(self.dim):
                    self.sums[slot, d] = self.sums[last, d]
                    self.sumsqs[slot, d] = self.sumsqs[last, d]
                self.logmargs[slot] = self.logmargs[last]
                moved = self.slot_to_id[last]
                self.slot_to_id[slot] = moved
                self.id_to_slot[moved] = slot
            self.slot_to_id[last] = -1
            self.misc_i[0] = last
        else:
            self.logmargs[slot] = self._marg_nd(
                self.counts[slot], &self.sums[slot, 0], &self.sumsqs[slot, 0]
            )
        return 0

    cdef void _add_existing(self, Py_ssize_t i, Py_ssize_t slot, double new_lm) noexcept:
        cdef double *x = &self.data[i, 0]
        cdef Py_ssize_t d
        self.z[i] = self.slot_to_id[slot]
        self.counts[slot] += 1
        for d in range(self.dim):
            self.sums[slot, d] += x[d]
            self.sumsqs[slot, d] += x[d] * x[d]
        self.logmargs[slot] = new_lm

    cdef int64_t _pop_id(self) except -1:
        cdef long top = self.misc_i[1] - 1
        if top < 0:
            raise RuntimeError("cluster id free-list exhausted")
        self.misc_i[1] = top
        return self.free_ids[top]

    cdef int _add_new(self, Py_ssize_t i, double lm_single) except -1:
        cdef double *x = &self.data[i, 0]
        cdef int64_t cid = self._pop_id()
        cdef Py_ssize_t slot = self.misc_i[0]
        cdef Py_ssize_t d
        self.slot_to_id[slot] = cid
        self.id_to_slot[cid] = slot
        self.counts[slot] = 1
        for d in range(self.dim):
            self.sums[slot, d] = x[d]
            self.sumsqs[slot, d] = x[d] * x[d]
        self.logmargs[slot] = lm_single
        self.z[i] = cid
        self.misc_i[0] = slot + 1
        return 0

    # -- Gibbs sweep -----------------------------------------------------------

    cdef int _reassign(self, Py_ssize_t i) except -1:
        cdef double *x = &self.data[i, 0]
        self._remove(i)
        cdef long t = self.misc_i[0]
        if t + 1 > self.t_cap:
            self._grow(t + 1)

        cdef double wmax = NEG_INF
        cdef Py_ssize_t slot, j, choice
        cdef double lm1, wj, lm_single, w_new, lv1, s, u, thr
        for slot in range(t):
            lm1 = self._marg_plus(
                self.counts[slot], &self.sums[slot, 0], &self.sumsqs[slot, 0], x
            )
            self.cand_lm[slot] = lm1
            wj = self.log_n_gamma[self.counts[slot]] + (lm1 - self.logmargs[slot])
            self.w[slot] = wj
            if wj > wmax:
                wmax = wj
        lm_single = self._marg_plus(0, &self.zeros[0], &self.zeros[0], x)
        self.cand_lm[t] = lm_single
        if t == 0:
            w_new = 0.0
        else:
            lv1 = self.logv[t + 1]
            if lv1 == NEG_INF:
                w_new = NEG_INF
            else:
                w_new = self.log_gamma + (lv1 - self.logv[t]) + lm_single
        self.w[t] = w_new
        if w_new > wmax:
            wmax = w_new
        if wmax == NEG_INF:
            raise RuntimeError("all reassignment weights are -inf")

        s = 0.0
        for j in range(t + 1):
            if self.w[j] == NEG_INF:
                self.cum[j] = s
                continue
            s += exp(self.w[j] - wmax)
            self.cum[j] = s
        u = self.bg.next_double(self.bg.state)
        thr = u * s
        choice = 0
        while choice < t and thr >= self.cum[choice]:
            choice += 1
        if choice < t:
            self._add_existing(i, choice, self.cand_lm[choice])
        else:
            self._add_new(i, lm_single)
        return 0

    def reassign(self, i):
        self._reassign(i)

    def sweep(self):
        self.state.refill_free_ids()
        cdef Py_ssize_t i
        for i in range(self.n):
            self._reassign(i)

    # -- split-merge -----------------------------------------------------------

    cdef Py_ssize_t _collect_members(
        self, int64_t cid_a, int64_t cid_b, Py_ssize_t i, Py_ssize_t j
    ) noexcept:
        cdef Py_ssize_t idx, k = 0
        cdef int64_t cc
        for idx in range(self.n):
            if idx == i or idx == j:
                continue
            cc = self.z[idx]
            if cc == cid_a or cc == cid_b:
                self.members[k] = idx
                k += 1
        return k

    cdef double _scan(
        self, Py_ssize_t n_s, bint sample, bint accumulate, int64_t target_a_cid
    ) noexcept:
        cdef Py_ssize_t idx, d, k
        cdef double *x
        cdef double lm_without, pred_a, pred_b, lm_b_with, lm_a_with
        cdef double wa, wb, mx, ea, eb, ssum, u, chosen, p
        cdef bint to_a
        cdef double log_q = 0.0
        for idx in range(n_s):
            k = self.members[idx]
            x = &self.data[k, 0]
            if self.side[idx] == 0:
                self.na -= 1
                for d in range(self.dim):
                    self.sa[d] -= x[d]
                    self.qa[d] -= x[d] * x[d]
                lm_without = self._marg_nd(self.na, &self.sa[0], &self.qa[0])
                pred_a = self.lma - lm_without
                self.lma = lm_without
                lm_b_with = self._marg_plus(self.nb, &self.sb[0], &self.qb[0], x)
                pred_b = lm_b_with - self.lmb
            else:
                self.nb -= 1
                for d in range(self.dim):
                    self.sb[d] -= x[d]
                    self.qb[d] -= x[d] * x[d]
                lm_without = self._marg_nd(self.nb, &self.sb[0], &self.qb[0])
                pred_b = self.lmb - lm_without
                self.lmb = lm_without
                lm_a_with = self._marg_plus(self.na, &self.sa[0], &self.qa[0], x)
                pred_a = lm_a_with - self.lma
            wa = self.log_n_gamma[self.na] + pred_a
            wb = self.log_n_gamma[self.nb] + pred_b
            mx = wa if wa > wb else wb
            ea = exp(wa - mx)
            eb = exp(wb - mx)
            ssum = ea + eb
            if sample:
                u = self.bg.next_double(self.bg.state)
                to_a = u * ssum < ea
            else:
                to_a = self.z[k] == target_a_cid
            if accumulate or not sample:
                chosen = ea if to_a else eb
                p = chosen / ssum
                log_q += log(p) if p > 0.0 else NEG_INF
            if to_a:
                self.side[idx] = 0
                self.na += 1
                for d in range(self.dim):
                    self.sa[d] += x[d]
                    self.qa[d] += x[d] * x[d]
                self.lma = self._marg_nd(self.na, &self.sa[0], &self.qa[0])
            else:
                self.side[idx] = 1
                self.nb += 1
                for d in range(self.dim):
                    self.sb[d] += x[d]
                    self.qb[d] += x[d] * x[d]
                self.lmb = self._marg_nd(self.nb, &self.sb[0], &self.qb[0])
        return log_q

    cdef double _launch(
        self,
        Py_ssize_t i,
        Py_ssize_t j,
        Py_ssize_t n_s,
        long restricted_scans,
        int64_t target_a_cid,
        bint have_target,
    ) noexcept:
        cdef double *xi = &self.data[i, 0]
        cdef double *xj = &self.data[j, 0]
        cdef double *x
        cdef Py_ssize_t d, idx, k
        cdef double u, log_q
        cdef long r
        self.na = 1
        self.nb = 1
        for d in range(self.dim):
            self.sa[d] = xi[d]
            self.qa[d] = xi[d] * xi[d]
            self.sb[d] = xj[d]
            self.qb[d] = xj[d] * xj[d]
        for idx in range(n_s):
            k = self.members[idx]
            x = &self.data[k, 0]
            u = self.bg.next_double(self.bg.state)
            if u < 0.5:
                self.side[idx] = 0
                self.na += 1
                for d in range(self.dim):
                    self.sa[d] += x[d]
                    self.qa[d] += x[d] * x[d]
            else:
                self.side[idx] = 1
                self.nb += 1
                for d in range(self.dim):
                    self.sb[d] += x[d]
                    self.qb[d] += x[d] * x[d]
        self.lma = self._marg_nd(self.na, &self.sa[0], &self.qa[0])
        self.lmb = self._marg_nd(self.nb, &self.sb[0], &self.qb[0])
        for r in range(restricted_scans - 1):
            self._scan(n_s, True, False, 0)
        if not have_target:
            log_q = self._scan(n_s, True, True, 0)
        else:
            log_q = self._scan(n_s, False, True, target_a_cid)
        return log_q

    cdef bint _accept(self, double log_ratio) noexcept:
        cdef double u
        if log_ratio >= 0.0:
            self.bg.next_double(self.bg.state)  # burn to keep streams aligned
            return True
        u = self.bg.next_double(self.bg.state)
        return u < exp(log_ratio)

    def split_merge(self, long restricted_scans, anchors=None, debug=None):
        if self.n < 2:
            return False
        self.state.refill_free_ids()
        cdef Py_ssize_t i, j
        cdef double u1, u2
        if anchors is None:
            u1 = self.bg.next_double(self.bg.state)
            i = <Py_ssize_t>(u1 * self.n)
            u2 = self.bg.next_double(self.bg.state)
            j = <Py_ssize_t>(u2 * (self.n - 1))
            if j >= i:
                j += 1
        else:
            i = anchors[0]
            j = anchors[1]
        cdef int64_t cid_i = self.z[i]
        cdef int64_t cid_j = self.z[j]
        cdef long t, n_all, n_a, n_b, n_u
        cdef double lv1, log_q, log_prior, log_lik, log_ratio, lm_merged
        cdef Py_ssize_t slot, slot_new, slot_a, slot_b, d, idx, last, n_s
        cdef int64_t cid_new, moved

        if cid_i == cid_j:
            t = self.misc_i[0]
            if t + 1 > self.t_cap:
                self._grow(t + 1)
            lv1 = self.logv[t + 1]
            if lv1 == NEG_INF:  # prior forbids t+1 clusters: auto-reject
                if debug is not None:
                    debug["kind"] = "split"
                    debug["log_ratio"] = NEG_INF
                return False
            n_s = self._collect_members(cid_i, cid_i, i, j)
            log_q = self._launch(i, j, n_s, restricted_scans, 0, False)
            slot = self.id_to_slot[cid_i]
            n_all = self.counts[slot]
            log_prior = (
                (lv1 - self.logv[t])
                + self.lgam_rise[self.na]
                + self.lgam_rise[self.nb]
                - self.lgam_rise[n_all]
            )
            log_lik = self.lma + self.lmb - self.logmargs[slot]
            log_ratio = log_prior + log_lik - log_q
            if debug is not None:
                debug["kind"] = "split"
                debug["log_q"] = log_q
                debug["log_prior"] = log_prior
                debug["log_lik"] = log_lik
                debug["log_ratio"] = log_ratio
                debug["n_a"] = int(self.na)
                debug["n_b"] = int(self.nb)
            if not self._accept(log_ratio):
                return False
            # apply: original slot keeps side A, a new cluster takes side B
            self.counts[slot] = self.na
            for d in range(self.dim):
                self.sums[slot, d] = self.sa[d]
                self.sumsqs[slot, d] = self.qa[d]
            self.logmargs[slot] = self.lma
            cid_new = self._pop_id()
            slot_new = self.misc_i[0]
            self.slot_to_id[slot_new] = cid_new
            self.id_to_slot[cid_new] = slot_new
            self.counts[slot_new] = self.nb
            for d in range(self.dim):
                self.sums[slot_new, d] = self.sb[d]
                self.sumsqs[slot_new, d] = self.qb[d]
            self.logmargs[slot_new] = self.lmb
            self.misc_i[0] = slot_new + 1
            self.z[j] = cid_new
            for idx in range(n_s):
                if self.side[idx] == 1:
                    self.z[self.members[idx]] = cid_new
            return True

        # merge: anchors in different clusters
        t = self.misc_i[0]
        n_s = self._collect_members(cid_i, cid_j, i, j)
        log_q = self._launch(i, j, n_s, restricted_scans, cid_i, True)
        slot_a = self.id_to_slot[cid_i]
        slot_b = self.id_to_slot[cid_j]
        n_a = self.counts[slot_a]
        n_b = self.counts[slot_b]
        n_u = n_a + n_b
        for d in range(self.dim):
            self.su[d] = self.sums[slot_a, d] + self.sums[slot_b, d]
            self.qu[d] = self.sumsqs[slot_a, d] + self.sumsqs[slot_b, d]
        lm_merged = self._marg_nd(n_u, &self.su[0], &self.qu[0])
        log_prior = (
            (self.logv[t - 1] - self.logv[t])
            + self.lgam_rise[n_u]
            - self.lgam_rise[n_a]
            - self.lgam_rise[n_b]
        )
        log_lik = lm_merged - self.logmargs[slot_a] - self.logmargs[slot_b]
        log_ratio = log_prior + log_lik + log_q
        if debug is not None:
            debug["kind"] = "merge"
            debug["log_q"] = log_q
            debug["log_prior"] = log_prior
            debug["log_lik"] = log_lik
            debug["log_ratio"] = log_ratio
        if not self._accept(log_ratio):
            return False
        # apply: anchor i's cluster absorbs anchor j's
        self.counts[slot_a] = n_u
        for d in range(self.dim):
            self.sums[slot_a, d] = self.su[d]
            self.sumsqs[slot_a, d] = self.qu[d]
        self.logmargs[slot_a] = lm_merged
        for idx in range(self.n):
            if self.z[idx] == cid_j:
                self.z[idx] = cid_i
        self.id_to_slot[cid_j] = -1
        last = t - 1
        if slot_b != last:
            self.counts[slot_b] = self.counts[last]
            for d in range(self.dim):
                self.sums[slot_b, d] = self.sums[last, d]
                self.sumsqs[slot_b, d] = self.sumsqs[last, d]
            self.logmargs[slot_b] = self.logmargs[last]
            moved = self.slot_to_id[last]
            self.slot_to_id[slot_b] = moved
            self.id_to_slot[moved] = slot_b
        self.slot_to_id[last] = -1
        self.misc_i[0] = last
        return True

    # -- beta update and k draw -------------------------------------------------

    def resample_beta(self, double u_shape, double v_rate):
        cdef long t = self.misc_i[0]
        cdef double beta = self.misc_f[0]
        cdef double new_beta, total_tau, sx, sxx, cd, mean, ssd, dev, bn, g, shape
        cdef Py_ssize_t slot, d
        cdef long nn
        if t == 0:
            new_beta = random_standard_gamma(self.bg, u_shape) / v_rate
        else:
            total_tau = 0.0
            for slot in range(t):
                nn = self.counts[slot]
                for d in range(self.dim):
                    sx = self.sums[slot, d]
                    sxx = self.sumsqs[slot, d]
                    cd = self.c[d]
                    mean = sx / nn
                    ssd = sxx - sx * mean
                    if ssd < 0.0:
                        ssd = 0.0
                    dev = mean - self.m[d]
                    bn = beta + 0.5 * ssd + (cd * nn * dev * dev) / (2.0 * (cd + nn))
                    g = random_standard_gamma(self.bg, self.alpha + 0.5 * nn)
                    total_tau += g / bn
            shape = u_shape + t * self.dim * self.alpha
            g = random_standard_gamma(self.bg, shape)
            new_beta = g / (v_rate + total_tau)
        self.misc_f[0] = new_beta
        self.misc_f[1] = log(new_beta)
        self.refresh_cached_marginals()
        return new_beta

    def draw_k(self):
        cdef long t = self.misc_i[0]
        if t > self.t_rows:
            raise RuntimeError(f"no k-draw row for t={t}")
        cdef long off0 = self.kcdf_off[t]
        cdef long off1 = self.kcdf_off[t + 1]
        cdef long length = off1 - off0
        cdef double u = self.bg.next_double(self.bg.state)
        cdef long idx = 0
        while idx < length - 1 and u >= self.kcdf[off0 + idx]:
            idx += 1
        return t + idx

    # -- properties ---------------------------------------------------------------

    @property
    def t(self):
        return int(self.misc_i[0])

    @property
    def beta(self):
        return float(self.misc_f[0])
