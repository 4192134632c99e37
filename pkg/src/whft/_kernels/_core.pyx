# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: event-simulation batch and control-cost scan.

Semantics match `pyfallback` exactly; see that module for the contract.
The event simulation is integer arithmetic and bit-identical to the pure
path.  The cost scan computes the induced 2-norm of the state block via
a cyclic Jacobi eigensolver on B^T B.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

BACKEND = "compiled"

cdef long long INF = 2 ** 62
cdef double NORM_GUARD = 1e100
DEF MAX_DIM = 16
DEF MAX_BLOCK = 8


def simulate_batch(periods, budgets, recoveries, prios, counts, offsets,
                   scen_task, scen_inst):
    """See pyfallback.simulate_batch."""
    cdef cnp.int64_t[::1] t_ = np.ascontiguousarray(periods, dtype=np.int64)
    cdef cnp.int64_t[::1] c_ = np.ascontiguousarray(budgets, dtype=np.int64)
    cdef cnp.int64_t[::1] cr_ = np.ascontiguousarray(recoveries, dtype=np.int64)
    cdef cnp.int64_t[::1] p_ = np.ascontiguousarray(prios, dtype=np.int64)
    cdef cnp.int64_t[::1] m_ = np.ascontiguousarray(counts, dtype=np.int64)
    cdef cnp.int64_t[::1] off_ = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef cnp.int64_t[::1] st_ = np.ascontiguousarray(scen_task, dtype=np.int64)
    cdef cnp.int64_t[::1] si_ = np.ascontiguousarray(scen_inst, dtype=np.int64)
    cdef Py_ssize_t n = t_.shape[0]
    cdef Py_ssize_t n_s = st_.shape[0]
    cdef long long total = 0
    cdef Py_ssize_t i
    for i in range(n):
        total += m_[i]
    out_arr = np.zeros((n_s, total), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    rem_arr = np.zeros(total, dtype=np.int64)
    head_arr = np.zeros(n, dtype=np.int64)
    tail_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] rem = rem_arr
    cdef cnp.int64_t[::1] head = head_arr
    cdef cnp.int64_t[::1] tail = tail_arr
    cdef Py_ssize_t s
    for s in range(n_s):
        _simulate_one(t_, c_, cr_, p_, m_, off_, st_[s], si_[s],
                      rem, head, tail, out[s])
    return out_arr


cdef void _simulate_one(cnp.int64_t[::1] periods, cnp.int64_t[::1] budgets,
                        cnp.int64_t[::1] recoveries, cnp.int64_t[::1] prios,
                        cnp.int64_t[::1] counts, cnp.int64_t[::1] offsets,
                        long long s_task, long long s_inst,
                        cnp.int64_t[::1] rem, cnp.int64_t[::1] head,
                        cnp.int64_t[::1] tail, cnp.int64_t[:] row) noexcept:
    cdef Py_ssize_t n = periods.shape[0]
    cdef Py_ssize_t i, best
    cdef long long pending = 0
    cdef long long rec_task = -1
    cdef long long rec_inst = -1
    cdef long long rec_rem = 0
    cdef long long t = 0
    cdef long long nxt, r, need, run, next_rel, best_prio, idx, j
    cdef bint best_is_rec, is_rec
    for i in range(n):
        head[i] = 0
        tail[i] = 0
    while True:
        if pending == 0 and rec_task < 0:
            nxt = INF
            for i in range(n):
                if tail[i] < counts[i]:
                    r = tail[i] * periods[i]
                    if r < nxt:
                        nxt = r
            if nxt == INF:
                break
            if nxt > t:
                t = nxt
        for i in range(n):
            while tail[i] < counts[i] and tail[i] * periods[i] <= t:
                rem[offsets[i] + tail[i]] = budgets[i]
                tail[i] += 1
                pending += 1
        best = -1
        best_prio = INF
        best_is_rec = False
        for i in range(n):
            is_rec = rec_task == i
            if head[i] >= tail[i] and not is_rec:
                continue
            if prios[i] < best_prio:
                best_prio = prios[i]
                best = i
                best_is_rec = is_rec
        if best < 0:
            continue
        next_rel = INF
        for i in range(n):
            if tail[i] < counts[i]:
                r = tail[i] * periods[i]
                if r < next_rel:
                    next_rel = r
        if best_is_rec:
            need = rec_rem
        else:
            need = rem[offsets[best] + head[best]]
        run = need
        if next_rel != INF and next_rel - t < run:
            run = next_rel - t
        t += run
        if best_is_rec:
            rec_rem -= run
            if rec_rem == 0:
                row[offsets[rec_task] + rec_inst] = t
                rec_task = -1
                rec_inst = -1
        else:
            idx = offsets[best] + head[best]
            rem[idx] -= run
            if rem[idx] == 0:
                j = head[best]
                head[best] += 1
                pending -= 1
                if best == s_task and j == s_inst and recoveries[best] > 0:
                    rec_task = best
                    rec_inst = j
                    rec_rem = recoveries[best]
                else:
                    row[idx] = t


cdef double _sigma_max_block(double* p, int dim, int n) noexcept:
    """Largest singular value of the leading n x n block of a dim x dim
    row-major matrix, via cyclic Jacobi on S = B^T B."""
    cdef double s[MAX_BLOCK][MAX_BLOCK]
    cdef int a, b, c, sweep, q
    cdef double acc, off, scale, tau, tt, cs, sn, spp, sqq, spq, skp, skq
    cdef double best
    for a in range(n):
        for b in range(n):
            acc = 0.0
            for c in range(n):
                acc += p[c * dim + a] * p[c * dim + b]
            s[a][b] = acc
    scale = 1.0
    for a in range(n):
        if fabs(s[a][a]) > scale:
            scale = fabs(s[a][a])
    for sweep in range(64):
        off = 0.0
        for a in range(n - 1):
            for b in range(a + 1, n):
                if fabs(s[a][b]) > off:
                    off = fabs(s[a][b])
        if off <= 1e-16 * scale:
            break
        for a in range(n - 1):
            for b in range(a + 1, n):
                spq = s[a][b]
                if spq == 0.0:
                    continue
                tau = (s[b][b] - s[a][a]) / (2.0 * spq)
                if tau >= 0.0:
                    tt = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    tt = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                cs = 1.0 / sqrt(1.0 + tt * tt)
                sn = tt * cs
                spp = s[a][a]
                sqq = s[b][b]
                s[a][a] = cs * cs * spp - 2.0 * sn * cs * spq + sn * sn * sqq
                s[b][b] = sn * sn * spp + 2.0 * sn * cs * spq + cs * cs * sqq
                s[a][b] = 0.0
                s[b][a] = 0.0
                for q in range(n):
                    if q != a and q != b:
                        skp = s[q][a]
                        skq = s[q][b]
                        s[q][a] = cs * skp - sn * skq
                        s[a][q] = s[q][a]
                        s[q][b] = sn * skp + cs * skq
                        s[b][q] = s[q][b]
    best = 0.0
    for a in range(n):
        if s[a][a] > best:
            best = s[a][a]
    if best < 0.0:
        best = 0.0
    return sqrt(best)


def cost_scan(phis, int n, double j_th, int h_max):
    """See pyfallback.cost_scan.  Requires dim <= 16 and n <= 8."""
    cdef cnp.float64_t[:, :, ::1] f = np.ascontiguousarray(phis, dtype=np.float64)
    cdef int length = f.shape[0]
    cdef int dim = f.shape[1]
    if dim > MAX_DIM or n > MAX_BLOCK or n > dim:
        raise ValueError("cost_scan kernel dimension limits exceeded")
    cdef double p[MAX_DIM * MAX_DIM]
    cdef double tmp[MAX_DIM * MAX_DIM]
    cdef int k, r, a, b, c, idx
    cdef long long worst = 0
    cdef long long last_viol, h_k
    cdef double acc, sig
    cdef const double* step
    for k in range(length):
        for a in range(dim):
            for b in range(dim):
                p[a * dim + b] = 1.0 if a == b else 0.0
        last_viol = 0 if 1.0 > j_th else -1
        for r in range(1, h_max + 1):
            idx = (k + r - 1) % length
            step = &f[idx, 0, 0]
            for a in range(dim):
                for b in range(dim):
                    acc = 0.0
                    for c in range(dim):
                        acc += step[a * dim + c] * p[c * dim + b]
                    tmp[a * dim + b] = acc
            for a in range(dim * dim):
                p[a] = tmp[a]
            sig = _sigma_max_block(p, dim, n)
            if sig > NORM_GUARD:
                return 0, True
            if sig > j_th:
                last_viol = r
        h_k = last_viol + 1
        if h_k > h_max:
            return 0, True
        if h_k > worst:
            worst = h_k
    return int(worst), False
