"""Pure-Python kernels: event simulation batch and control-cost scan.

Mirrors the compiled extension's semantics exactly; selected when the
extension is unavailable or when WHFT_PURE=1.  Integer scheduling is
bit-identical to the compiled path; the cost scan may differ in the last
float ulps (different matmul orderings), never in substance.
"""

from __future__ import annotations

import numpy as np

BACKEND = "pure"

_INF = 2**62
_NORM_GUARD = 1e100


def simulate_batch(periods, budgets, recoveries, prios, counts, offsets, scen_task, scen_inst):
    """Simulate one CPU under every scenario; return job completion times.

    One scenario is (struck task index, struck instance index), or
    (-1, -1) for the error-free run.  Jobs are released at j*period for
    j < counts[i]; preemptive fixed priorities (smaller value wins); the
    struck job spawns a recovery of the task's recovery budget the
    instant its primary budget completes, at the same priority, and the
    instance's recorded completion is the recovery completion.  Released
    jobs run to completion even past the horizon.
    """
    periods = [int(x) for x in periods]
    budgets = [int(x) for x in budgets]
    recoveries = [int(x) for x in recoveries]
    prios = [int(x) for x in prios]
    counts = [int(x) for x in counts]
    offsets = [int(x) for x in offsets]
    n = len(periods)
    total = sum(counts)
    out = np.zeros((len(scen_task), total), dtype=np.int64)
    for s in range(len(scen_task)):
        _simulate_one(
            periods, budgets, recoveries, prios, counts, offsets,
            int(scen_task[s]), int(scen_inst[s]), out[s],
        )
    return out


def _simulate_one(periods, budgets, recoveries, prios, counts, offsets,
                  s_task, s_inst, row):
    n = len(periods)
    head = [0] * n        # next pending instance per task
    tail = [0] * n        # next instance to release per task
    rem = [0] * sum(counts)
    pending = 0
    rec_task = -1         # task owning the pending recovery job, -1 = none
    rec_inst = -1
    rec_rem = 0
    t = 0
    while True:
        if pending == 0 and rec_task < 0:
            # idle: jump to the earliest future release
            nxt = _INF
            for i in range(n):
                if tail[i] < counts[i]:
                    r = tail[i] * periods[i]
                    if r < nxt:
                        nxt = r
            if nxt == _INF:
                break
            if nxt > t:
                t = nxt
        # admit every release up to the current time
        for i in range(n):
            while tail[i] < counts[i] and tail[i] * periods[i] <= t:
                rem[offsets[i] + tail[i]] = budgets[i]
                tail[i] += 1
                pending += 1
        # highest-priority pending work; a task's recovery outranks its
        # own queued primaries (same priority, older work first)
        best = -1
        best_prio = _INF
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
        next_rel = _INF
        for i in range(n):
            if tail[i] < counts[i]:
                r = tail[i] * periods[i]
                if r < next_rel:
                    next_rel = r
        if best_is_rec:
            need = rec_rem
        else:
            need = rem[offsets[best] + head[best]]
        run = need if next_rel == _INF else min(need, next_rel - t)
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
                    # error detected at output: re-execution starts now
                    rec_task = best
                    rec_inst = j
                    rec_rem = recoveries[best]
                else:
                    row[idx] = t


def cost_scan(phis, n, j_th, h_max):
    """Worst settling horizon of a cyclic step-matrix pattern.

    For each cyclic start k, h_k is one past the last step r in
    [0, h_max] at which the induced 2-norm of the state block of the
    r-step transition exceeds j_th.  Returns (max_k h_k, unstable);
    unstable when some h_k exceeds h_max or the norm blows past the
    overflow guard.
    """
    phis = np.asarray(phis, dtype=np.float64)
    length, dim, _ = phis.shape
    worst = 0
    for k in range(length):
        p = np.eye(dim)
        last_viol = 0 if 1.0 > j_th else -1
        for r in range(1, h_max + 1):
            p = phis[(k + r - 1) % length] @ p
            s = np.linalg.norm(p[:n, :n], 2)
            if s > _NORM_GUARD:
                return 0, True
            if s > j_th:
                last_viol = r
        h_k = last_viol + 1
        if h_k > h_max:
            return 0, True
        if h_k > worst:
            worst = h_k
    return worst, False
