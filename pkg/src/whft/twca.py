"""Analytic deadline-miss bounding under a sporadic recovery overload.

Bounds the worst-case response time of typical activations when at most
one re-execution burst per minimum inter-error distance can interfere,
then derives a deadline-miss model dmm(n): the maximum number of misses
any n consecutive activations of a task can suffer.  The bound is sound
but pessimistic; the event simulator gives exact per-scenario patterns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .model import SystemConfig, Task, TimeTick, effective_wcet, recovery_wcet


class BusyWindowDivergence(Exception):
    """The busy-window fixed point exceeded the divergence cap."""


def _interference(task: Task, cfg: SystemConfig) -> tuple[list[Task], list[Task]]:
    """(strictly higher priority tasks, higher-or-equal incl. self) on the
    task's CPU, realized with the configuration's detection choices."""
    cpu = cfg.allocation[task.id]
    own_prio = cfg.priority[task.id]
    higher: list[Task] = []
    hep: list[Task] = []
    for other in cfg.tasks_on(cpu):
        if other.id == task.id:
            hep.append(other)
        elif cfg.priority[other.id] < own_prio:
            higher.append(other)
            hep.append(other)
    return higher, hep


def _busy_demand(task: Task, q: int, higher: list[Task], max_cr: TimeTick,
                 dt_err: TimeTick, cap: TimeTick) -> TimeTick:
    """Least fixed point of
        B = q*C + sum_{hp} ceil(B/t_j)*C_j + max_cr * ceil(B/dt_err)
    iterated upward from the bare q-activation demand."""
    b = q * effective_wcet(task)
    while True:
        nxt = q * effective_wcet(task)
        for other in higher:
            nxt += -(-b // other.period) * effective_wcet(other)
        nxt += max_cr * -(-b // dt_err)
        if nxt == b:
            return b
        if nxt > cap:
            raise BusyWindowDivergence(
                f"busy window of task {task.id} exceeds {cap} ticks at q={q}"
            )
        b = nxt


@dataclass(frozen=True)
class TaskTwca:
    """Per-task analysis record.

    typical_feasible records whether the task meets its deadline with
    the overload term removed; the miss bound is only meaningful then,
    since typical overruns repeat every busy period and need no error.
    """

    task_id: str
    converged: bool
    busy_window: Optional[TimeTick]
    k_i: Optional[int]
    wcrt: Optional[TimeTick]
    miss_candidates: frozenset[int]
    busy_demands: tuple[TimeTick, ...]  # demand for q = 1..K
    dmm: dict[int, int]  # constraint window n -> bound
    schedulable: bool
    typical_feasible: bool = True


def analyze_task(task: Task, cfg: SystemConfig) -> TaskTwca:
    """Single-pass busy-window analysis for one task under a configuration.

    The busy window closes at the first q whose q-activation demand ends
    before the (q+1)-th periodic release; the response time is the worst
    finishing lag over the examined activations, and the candidates are
    the activation indices that can overshoot the deadline.
    """
    task_r = cfg.realized(task)
    higher, hep = _interference(task_r, cfg)
    fm = cfg.system.fault_model
    dt_err = fm.min_error_distance
    cap = 2 * cfg.system.hyperperiod
    max_cr = max(recovery_wcet(t) for t in hep)
    demands: list[TimeTick] = []
    # Exact-rational load pre-check.  Interference rate >= 1 means no
    # finite fixed point exists for any q; a strictly over-unit total
    # rate means the busy window can never close.  Bailing out here is
    # not an approximation, just a cheaper route to the same divergence.
    rate_hp = sum(
        Fraction(effective_wcet(o), o.period) for o in higher
    ) + Fraction(max_cr, dt_err)
    if rate_hp >= 1 or rate_hp + Fraction(effective_wcet(task_r), task_r.period) > 1:
        return TaskTwca(
            task_id=task.id, converged=False, busy_window=None, k_i=None,
            wcrt=None, miss_candidates=frozenset(), busy_demands=(),
            dmm={}, schedulable=False,
        )
    try:
        q = 1
        while True:
            b = _busy_demand(task_r, q, higher, max_cr, dt_err, cap)
            demands.append(b)
            if b <= q * task_r.period:
                break
            q += 1
    except BusyWindowDivergence:
        return TaskTwca(
            task_id=task.id, converged=False, busy_window=None, k_i=None,
            wcrt=None, miss_candidates=frozenset(), busy_demands=tuple(demands),
            dmm={}, schedulable=False,
        )
    k_i = len(demands)
    bw = demands[-1]
    lags = [demands[i] - i * task_r.period for i in range(k_i)]
    r = max(lags)
    cands = frozenset(i + 1 for i in range(k_i) if lags[i] > task_r.deadline)
    typical_ok = _typical_feasible(task_r, higher, cap) if max_cr else not cands
    dmm: dict[int, int] = {}
    ok = True
    for c in task.constraints:
        if typical_ok:
            bound = _dmm_from_parts(task_r, c.n, bw, r, cands, dt_err)
        else:
            # typical overruns repeat every busy period with no error
            # needed; the per-burst accounting has no bound to offer
            bound = c.n
        dmm[c.n] = bound
        if bound > c.k:
            ok = False
    return TaskTwca(
        task_id=task.id, converged=True, busy_window=bw, k_i=k_i, wcrt=r,
        miss_candidates=cands, busy_demands=tuple(demands), dmm=dmm,
        schedulable=ok, typical_feasible=typical_ok,
    )


def _typical_feasible(task: Task, higher: list[Task], cap: TimeTick) -> bool:
    """Deadline check with the overload term removed."""
    try:
        q = 1
        while True:
            b = _busy_demand(task, q, higher, 0, 1, cap)
            if b - (q - 1) * task.period > task.deadline:
                return False
            if b <= q * task.period:
                return True
            q += 1
    except BusyWindowDivergence:
        return False


def _dmm_from_parts(task: Task, n: int, bw: TimeTick, r: TimeTick,
                    candidates: frozenset[int], dt_err: TimeTick) -> int:
    if not candidates:
        return 0
    span = bw + (n - 1) * task.period + r
    bursts = -(-span // dt_err)
    return min(n, len(candidates) * bursts)


# ---------------------------------------------------------------------------
# Spec-level operations (thin wrappers over the single-pass analysis)
# ---------------------------------------------------------------------------


def busy_demand(task: Task, q: int, cfg: SystemConfig) -> TimeTick:
    """Least time that processes q activations of the task in a busy window.

    The overload max ranges over higher-or-equal priority including the
    task itself: its own recovery job runs at its own priority and delays
    its next activations.
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    task_r = cfg.realized(task)
    higher, hep = _interference(task_r, cfg)
    fm = cfg.system.fault_model
    max_cr = max(recovery_wcet(t) for t in hep)
    return _busy_demand(
        task_r, q, higher, max_cr, fm.min_error_distance, 2 * cfg.system.hyperperiod
    )


def busy_window(task: Task, cfg: SystemConfig) -> tuple[TimeTick, int]:
    """(window length BW, number of activations K examined)."""
    rec = analyze_task(task, cfg)
    if not rec.converged:
        raise BusyWindowDivergence(f"busy window of task {task.id} diverges")
    return rec.busy_window, rec.k_i


def wcrt(task: Task, cfg: SystemConfig) -> TimeTick:
    """Worst-case response time over all activations in the busy window."""
    rec = analyze_task(task, cfg)
    if not rec.converged:
        raise BusyWindowDivergence(f"busy window of task {task.id} diverges")
    return rec.wcrt


def miss_candidates(task: Task, cfg: SystemConfig) -> set[int]:
    """Activation indices within the busy window that can miss the deadline."""
    rec = analyze_task(task, cfg)
    if not rec.converged:
        raise BusyWindowDivergence(f"busy window of task {task.id} diverges")
    return set(rec.miss_candidates)


def dmm_bound(task: Task, n: int, cfg: SystemConfig) -> int:
    """Upper bound on deadline misses in any n consecutive activations.

    Each error burst spoils at most the candidate activations of one busy
    window; the burst count over the stretch spanned by n activations
    plus one busy window and one response time is limited by the minimum
    inter-error distance.  Capped at n (more misses than activations is
    vacuous), and pinned to n when the fixed point diverges or the typical
    load alone already misses deadlines: then misses recur without any
    error and the per-burst accounting has no bound to offer.
    """
    if n < 1:
        raise ValueError(f"window must be >= 1, got {n}")
    rec = analyze_task(task, cfg)
    if not rec.converged or not rec.typical_feasible:
        return n
    task_r = cfg.realized(task)
    return _dmm_from_parts(
        task_r, n, rec.busy_window, rec.wcrt, rec.miss_candidates,
        cfg.system.fault_model.min_error_distance,
    )


@dataclass(frozen=True)
class TwcaReport:
    """Analysis outcome for a whole configuration."""

    tasks: tuple[TaskTwca, ...] = field(default_factory=tuple)

    @property
    def schedulable(self) -> bool:
        return all(t.schedulable for t in self.tasks)

    def __getitem__(self, task_id: str) -> TaskTwca:
        for t in self.tasks:
            if t.task_id == task_id:
                return t
        raise KeyError(task_id)


def twca_verdict(cfg: SystemConfig) -> TwcaReport:
    """Schedulability verdict: every declared constraint's dmm within budget.

    Divergent busy windows mark the task unschedulable rather than
    raising; the explorer visits such configurations transiently.
    """
    return TwcaReport(tuple(analyze_task(t, cfg) for t in cfg.system.tasks))
