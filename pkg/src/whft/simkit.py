"""Exact event-driven fixed-priority simulation with error injection.

Simulates one hyper-period per CPU under preemptive static priorities,
once per candidate error scenario (no error, or one transient error per
detection-enabled job instance).  A struck job releases a re-execution
(recovery) job the instant its primary budget completes; the struck
instance's miss verdict is judged on the recovery completion since the
output is not trustworthy before re-execution finishes.  Jobs keep
running past their deadlines and, when needed, past the hyper-period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .model import (
    MissPattern,
    SystemConfig,
    Task,
    TimeTick,
    effective_wcet,
    recovery_wcet,
    satisfies_constraints,
)
from .twca import analyze_task


@dataclass(frozen=True)
class Job:
    """One activation: primary execution or the recovery re-execution."""

    task_id: str
    instance: int
    release: TimeTick
    budget: TimeTick
    kind: str = "primary"  # or "recovery"

    def __post_init__(self) -> None:
        if self.kind not in ("primary", "recovery"):
            raise ValueError(f"unknown job kind {self.kind!r}")


@dataclass(frozen=True)
class ErrorScenario:
    """Which job the single transient error strikes; none = error-free."""

    task_id: Optional[str] = None
    instance: Optional[int] = None

    @property
    def is_none(self) -> bool:
        return self.task_id is None


@dataclass(frozen=True)
class SimOutcome:
    """Exact result of one scenario on one CPU."""

    cpu: str
    scenario: ErrorScenario
    patterns: dict[str, MissPattern]
    completions: dict[tuple[str, int], TimeTick]
    schedulable: bool


@dataclass(frozen=True)
class SimVerdict:
    """Aggregated result over every scenario on every CPU."""

    schedulable: bool
    worst_patterns: dict[str, MissPattern]
    violations: frozenset[str] = frozenset()
    via_shortcut: bool = False
    scenario_count: int = 0


def _cpu_arrays(cfg: SystemConfig, cpu: str):
    """Flat per-CPU task arrays in declaration order."""
    tasks = [cfg.realized(t) for t in cfg.system.tasks if cfg.allocation[t.id] == cpu]
    hyper = cfg.system.hyperperiod
    periods = np.array([t.period for t in tasks], dtype=np.int64)
    budgets = np.array([effective_wcet(t) for t in tasks], dtype=np.int64)
    recoveries = np.array([recovery_wcet(t) for t in tasks], dtype=np.int64)
    prios = np.array([cfg.priority[t.id] for t in tasks], dtype=np.int64)
    counts = np.array([hyper // t.period for t in tasks], dtype=np.int64)
    offsets = np.zeros(len(tasks), dtype=np.int64)
    if len(tasks) > 1:
        offsets[1:] = np.cumsum(counts)[:-1]
    return tasks, periods, budgets, recoveries, prios, counts, offsets


def enumerate_scenarios(cfg: SystemConfig, cpu: str) -> list[ErrorScenario]:
    """Error-free plus one scenario per (protected task, instance) on the CPU."""
    hyper = cfg.system.hyperperiod
    out = [ErrorScenario()]
    for task in cfg.system.tasks:
        if cfg.allocation[task.id] != cpu:
            continue
        if recovery_wcet(cfg.realized(task)) == 0:
            continue
        for j in range(hyper // task.period):
            out.append(ErrorScenario(task.id, j))
    return out


def simulate_scenario(
    cfg: SystemConfig, cpu: str, scenario: ErrorScenario,
    trace: Optional[list] = None,
) -> SimOutcome:
    """Exact simulation of one scenario on one CPU.

    The schedulable verdict embeds the scenario between two error-free
    hyper-periods so windows straddling the error hyper-period are
    checked too.  Passing a list as `trace` records chronological
    (time, cpu, job, event) tuples via the reference simulator.
    """
    if not scenario.is_none and cfg.allocation[scenario.task_id] != cpu:
        raise ValueError(f"scenario task {scenario.task_id} is not on CPU {cpu!r}")
    tasks, periods, budgets, recoveries, prios, counts, offsets = _cpu_arrays(cfg, cpu)
    if trace is not None:
        completions = _reference_sim(cfg, cpu, scenario, trace)
    else:
        index = {t.id: i for i, t in enumerate(tasks)}
        if scenario.is_none:
            st, si = -1, -1
        else:
            st, si = index[scenario.task_id], scenario.instance
        rows = _kernels.simulate_batch(
            periods, budgets, recoveries, prios, counts, offsets,
            np.array([st], dtype=np.int64), np.array([si], dtype=np.int64),
        )
        completions = _row_to_completions(tasks, counts, offsets, rows[0])
    patterns = _patterns_from_completions(cfg, tasks, completions)
    if scenario.is_none:
        flanks = patterns
    else:
        flanks = simulate_scenario(cfg, cpu, ErrorScenario()).patterns
    ok = all(
        _pattern_ok(task, patterns[task.id], flanks[task.id]) for task in tasks
    )
    return SimOutcome(
        cpu=cpu, scenario=scenario, patterns=patterns,
        completions=completions, schedulable=ok,
    )


def _row_to_completions(tasks, counts, offsets, row):
    out: dict[tuple[str, int], TimeTick] = {}
    for i, task in enumerate(tasks):
        for j in range(int(counts[i])):
            out[(task.id, j)] = int(row[int(offsets[i]) + j])
    return out


def _patterns_from_completions(cfg, tasks, completions) -> dict[str, MissPattern]:
    hyper = cfg.system.hyperperiod
    out = {}
    for task in tasks:
        misses = tuple(
            completions[(task.id, j)] > j * task.period + task.deadline
            for j in range(hyper // task.period)
        )
        out[task.id] = MissPattern(task.id, misses)
    return out


def _pattern_ok(task: Task, pattern: MissPattern, flank: MissPattern) -> bool:
    padded = flank.misses + pattern.misses + flank.misses
    return satisfies_constraints(padded, task.constraints)


def event_sim_verdict(cfg: SystemConfig) -> SimVerdict:
    """Exhaustive single-error verdict, with the analytic shortcut.

    If the analytic worst-case response time already proves every task
    meets its deadline (recovery bursts included), no scenario can miss
    and simulation is skipped.  Otherwise every scenario on every CPU is
    simulated; the verdict requires every declared constraint to hold in
    every scenario.  worst_patterns picks, per task, the scenario pattern
    with the highest control cost (control tasks) or miss count (others).
    """
    system = cfg.system
    hyper = system.hyperperiod
    records = {t.id: analyze_task(t, cfg) for t in system.tasks}
    if all(
        rec.converged and rec.wcrt <= system.task(tid).deadline
        for tid, rec in records.items()
    ):
        patterns = {
            t.id: MissPattern.all_hit(t.id, hyper // t.period) for t in system.tasks
        }
        return SimVerdict(
            schedulable=True, worst_patterns=patterns, via_shortcut=True,
        )

    worst: dict[str, MissPattern] = {}
    worst_score: dict[str, tuple] = {}
    violations: set[str] = set()
    schedulable = True
    n_scen = 0
    for cpu in system.platform.cpu_ids:
        tasks, periods, budgets, recoveries, prios, counts, offsets = _cpu_arrays(
            cfg, cpu
        )
        if not tasks:
            continue
        index = {t.id: i for i, t in enumerate(tasks)}
        scenarios = enumerate_scenarios(cfg, cpu)
        n_scen += len(scenarios)
        st = np.array(
            [-1 if s.is_none else index[s.task_id] for s in scenarios], dtype=np.int64
        )
        si = np.array(
            [-1 if s.is_none else s.instance for s in scenarios], dtype=np.int64
        )
        rows = _kernels.simulate_batch(
            periods, budgets, recoveries, prios, counts, offsets, st, si
        )
        # instance-level absolute deadlines, flattened like the kernel rows
        dls = np.concatenate(
            [
                np.arange(int(counts[i])) * int(periods[i]) + tasks[i].deadline
                for i in range(len(tasks))
            ]
        )
        miss_rows = rows > dls[None, :]
        none_row = miss_rows[0]
        for s, scenario in enumerate(scenarios):
            for i, task in enumerate(tasks):
                lo = int(offsets[i])
                hi = lo + int(counts[i])
                misses = tuple(bool(x) for x in miss_rows[s, lo:hi])
                flank = tuple(bool(x) for x in none_row[lo:hi])
                if not satisfies_constraints(
                    flank + misses + flank, task.constraints
                ):
                    schedulable = False
                    violations.add(task.id)
                score = _pattern_score(system, task, misses)
                if task.id not in worst_score or score > worst_score[task.id]:
                    worst_score[task.id] = score
                    worst[task.id] = MissPattern(task.id, misses)
    return SimVerdict(
        schedulable=schedulable,
        worst_patterns=worst,
        violations=frozenset(violations),
        scenario_count=n_scen,
    )


def _pattern_score(system, task: Task, misses: tuple[bool, ...]):
    """Ordering key for the per-task worst pattern."""
    from . import control  # control never imports simkit

    if task.control is not None:
        dp = control.discretized(system.plants[task.control.plant_id])
        cost = control.control_cost(dp, misses)
        return (1, math.inf if cost is control.UNSTABLE else cost, sum(misses))
    return (0, sum(misses), 0)


# ---------------------------------------------------------------------------
# Reference simulator: slow, traced, used for --trace and as a test oracle
# ---------------------------------------------------------------------------


def _reference_sim(
    cfg: SystemConfig, cpu: str, scenario: ErrorScenario, trace: Optional[list]
) -> dict[tuple[str, int], TimeTick]:
    """Heap-free readable re-implementation of the kernel semantics."""
    tasks = [cfg.realized(t) for t in cfg.system.tasks if cfg.allocation[t.id] == cpu]
    hyper = cfg.system.hyperperiod
    prio = {t.id: cfg.priority[t.id] for t in tasks}

    class _Live:
        __slots__ = ("job", "remaining", "started")

        def __init__(self, job: Job):
            self.job = job
            self.remaining = job.budget
            self.started = False

    future: list[Job] = []
    for task in tasks:
        c = effective_wcet(task)
        for j in range(hyper // task.period):
            future.append(Job(task.id, j, j * task.period, c))
    future.sort(key=lambda job: (job.release, prio[job.task_id], job.instance))
    emit = trace.append if trace is not None else (lambda *a: None)

    ready: list[_Live] = []
    completions: dict[tuple[str, int], TimeTick] = {}
    t = 0
    fi = 0
    running: Optional[_Live] = None
    while fi < len(future) or ready:
        if not ready and fi < len(future) and future[fi].release > t:
            t = future[fi].release
        while fi < len(future) and future[fi].release <= t:
            ready.append(_Live(future[fi]))
            emit((t, cpu, _label(future[fi]), "release"))
            fi += 1
        # recovery (kind rank 0) precedes primaries at equal priority;
        # FIFO by instance within a task
        ready.sort(
            key=lambda lv: (
                prio[lv.job.task_id],
                0 if lv.job.kind == "recovery" else 1,
                lv.job.instance,
            )
        )
        nxt = ready[0]
        if running is not nxt:
            if running is not None and running.remaining > 0 and running in ready:
                emit((t, cpu, _label(running.job), "preempt"))
            emit((t, cpu, _label(nxt.job), "start"))
            running = nxt
        next_rel = future[fi].release if fi < len(future) else None
        run = nxt.remaining
        if next_rel is not None and next_rel - t < run:
            run = next_rel - t
        t += run
        nxt.remaining -= run
        if nxt.remaining == 0:
            ready.remove(nxt)
            running = None
            job = nxt.job
            struck = (
                job.kind == "primary"
                and not scenario.is_none
                and job.task_id == scenario.task_id
                and job.instance == scenario.instance
                and recovery_wcet(cfg.realized(cfg.system.task(job.task_id))) > 0
            )
            if struck:
                rec = Job(
                    job.task_id, job.instance, t,
                    recovery_wcet(cfg.realized(cfg.system.task(job.task_id))),
                    kind="recovery",
                )
                ready.append(_Live(rec))
                emit((t, cpu, _label(job), "complete"))
                emit((t, cpu, _label(rec), "recovery-release"))
            else:
                completions[(job.task_id, job.instance)] = t
                emit((t, cpu, _label(job), "complete"))
                task = cfg.system.task(job.task_id)
                if t > job.instance * task.period + task.deadline:
                    emit((t, cpu, _label(job), "deadline-miss"))
    return completions


def _label(job: Job) -> str:
    mark = "R" if job.kind == "recovery" else ""
    return f"{job.task_id}#{job.instance}{mark}"
