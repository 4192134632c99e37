"""Design-space exploration: detection choice, allocation, priorities.

The initial heuristic escalates detection one level at a time over tasks
in ascending utilization until the coverage requirement holds, packs
tasks onto CPUs first-fit-decreasing by effective utilization, and
assigns deadline-monotonic priorities.  Simulated annealing then mutates
the configuration (priority swaps, detection changes, migrations) under
a penalized objective, with schedulability checked by either the
analytic bound or the exact event simulation.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import random
from dataclasses import dataclass
from typing import Mapping, Optional

from . import control, coverage, simkit, twca
from .model import (
    DetectionChoice,
    ModelError,
    System,
    SystemConfig,
    Task,
    WeaklyHardConstraint,
    effective_wcet,
)

logger = logging.getLogger("whft.explore")

PENALTY_DEFAULT = 1e3


@dataclass(frozen=True)
class SaParams:
    """Annealing schedule, move mix, and penalty weights."""

    t0: float = 100.0
    t_star: float = 0.1
    cooling_factor: float = 0.95
    iter_max: int = 100
    seed: int = 0
    p_swap: float = 0.4
    p_detection: float = 0.4
    p_migrate: float = 0.2
    penalty_sched: float = PENALTY_DEFAULT
    penalty_coverage: float = PENALTY_DEFAULT
    penalty_stability: float = PENALTY_DEFAULT

    def __post_init__(self) -> None:
        if not self.t0 > self.t_star > 0:
            raise ModelError("need t0 > t_star > 0")
        if not 0 < self.cooling_factor < 1:
            raise ModelError("cooling factor must be in (0, 1)")
        if self.iter_max < 0:
            raise ModelError("iter_max must be >= 0")
        probs = (self.p_swap, self.p_detection, self.p_migrate)
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise ModelError("move probabilities must be non-negative and sum to 1")


@dataclass(frozen=True)
class Objective:
    """Evaluation of one configuration under one backend."""

    system_cost: float
    penalized: float
    schedulable: bool
    coverage: float
    coverage_ok: bool
    stable: bool
    violations: frozenset[str] = frozenset()
    unstable_tasks: frozenset[str] = frozenset()

    @property
    def feasible(self) -> bool:
        return self.schedulable and self.coverage_ok and self.stable


def system_cost(
    costs: Mapping[str, control.CostResult],
    weights: Mapping[str, float],
    desired: Mapping[str, float],
) -> tuple[float, frozenset[str]]:
    """Weighted sum of per-controller costs normalized by their targets.

    Unstable controllers are excluded from the sum and returned as the
    infeasibility flag; the caller adds its stability penalty instead.
    """
    total = 0.0
    unstable = set()
    for task_id, cost in costs.items():
        if cost is control.UNSTABLE:
            unstable.add(task_id)
        else:
            total += weights[task_id] * cost / desired[task_id]
    return total, frozenset(unstable)


def _escalation_order(system: System) -> list[Task]:
    return sorted(system.tasks, key=lambda t: (t.utilization, t.id))


def _ffd_allocation(system: System, detection: Mapping[str, DetectionChoice]) -> dict[str, str]:
    """First-fit decreasing on effective utilization; a task that fits
    nowhere goes to the least-loaded CPU (best effort, analyses flag it)."""
    cpus = system.platform.cpu_ids
    load = {cpu: 0.0 for cpu in cpus}
    alloc: dict[str, str] = {}
    eff = {
        t.id: effective_wcet(dataclasses.replace(t, detection=detection[t.id])) / t.period
        for t in system.tasks
    }
    for task in sorted(system.tasks, key=lambda t: (-eff[t.id], t.id)):
        u = eff[task.id]
        target = None
        for cpu in cpus:
            if load[cpu] + u <= 1.0 + 1e-12:
                target = cpu
                break
        if target is None:
            target = min(cpus, key=lambda c: (load[c], c))
        alloc[task.id] = target
        load[target] += u
    return alloc


def _dm_priorities(system: System, alloc: Mapping[str, str]) -> dict[str, int]:
    prio: dict[str, int] = {}
    for cpu in system.platform.cpu_ids:
        own = sorted(
            (t for t in system.tasks if alloc[t.id] == cpu),
            key=lambda t: (t.deadline, t.id),
        )
        for level, task in enumerate(own):
            prio[task.id] = level
    return prio


def _config(system: System, detection: Mapping[str, DetectionChoice]) -> SystemConfig:
    alloc = _ffd_allocation(system, detection)
    return SystemConfig(
        system=system,
        allocation=alloc,
        priority=_dm_priorities(system, alloc),
        detection=dict(detection),
    )


def detection_escalation(system: System):
    """All detection maps visited by the initial heuristic, in order.

    Starts all-off, then upgrades one level per task per pass (EED pass,
    then EOC pass) over tasks in ascending utilization.
    """
    detection = {t.id: DetectionChoice.NONE for t in system.tasks}
    yield dict(detection)
    order = _escalation_order(system)
    for _ in range(2):
        for task in order:
            if detection[task.id] is DetectionChoice.EOC:
                continue
            detection[task.id] = detection[task.id].escalated()
            yield dict(detection)


def initial_solution(system: System, threshold: float) -> SystemConfig:
    """Detection escalation until the coverage requirement holds, then
    first-fit-decreasing allocation and deadline-monotonic priorities.

    Escalation checks the allocation-independent global-sum coverage,
    which lower-bounds the per-CPU average, so the built configuration
    meets the threshold whenever it is reachable at all; otherwise the
    all-EOC best effort is returned and evaluation flags it.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ModelError(f"threshold must be within [0,1], got {threshold}")
    chosen = None
    for detection in detection_escalation(system):
        chosen = detection
        cfg = _config(system, detection)
        if coverage.coverage_single_error(cfg, global_sum=True) >= threshold:
            break
    return _config(system, chosen)


def random_move(cfg: SystemConfig, rng: random.Random, params: SaParams = SaParams()) -> SystemConfig:
    """One mutation: swap two priorities on a CPU, cycle one task's
    detection, or migrate a task to another CPU's lowest priority slot.

    Single-CPU platforms never draw the migration move (its probability
    is renormalized away); a swap draw falls back to a detection change
    when no CPU hosts two tasks.
    """
    system = cfg.system
    tasks = system.tasks
    multi_cpu = len(system.platform.cpu_ids) > 1
    p_swap, p_det, p_mig = params.p_swap, params.p_detection, params.p_migrate
    if not multi_cpu:
        scale = p_swap + p_det
        if scale == 0:
            p_swap, p_det = 0.5, 0.5
        else:
            p_swap, p_det = p_swap / scale, p_det / scale
        p_mig = 0.0
    draw = rng.random()
    if draw < p_swap:
        move = "swap"
    elif draw < p_swap + p_det:
        move = "detection"
    else:
        move = "migrate"

    if move == "swap":
        eligible = [
            cpu
            for cpu in system.platform.cpu_ids
            if sum(1 for t in tasks if cfg.allocation[t.id] == cpu) >= 2
        ]
        if not eligible:
            move = "detection"
        else:
            cpu = eligible[rng.randrange(len(eligible))]
            own = [t.id for t in tasks if cfg.allocation[t.id] == cpu]
            i = rng.randrange(len(own))
            j = rng.randrange(len(own) - 1)
            if j >= i:
                j += 1
            prio = dict(cfg.priority)
            prio[own[i]], prio[own[j]] = prio[own[j]], prio[own[i]]
            return cfg.replace(priority=prio)

    if move == "detection":
        task = tasks[rng.randrange(len(tasks))]
        detection = dict(cfg.detection)
        detection[task.id] = detection[task.id].cycled()
        return cfg.replace(detection=detection)

    task = tasks[rng.randrange(len(tasks))]
    current_cpu = cfg.allocation[task.id]
    others = [c for c in system.platform.cpu_ids if c != current_cpu]
    target = others[rng.randrange(len(others))]
    alloc = dict(cfg.allocation)
    alloc[task.id] = target
    prio = dict(cfg.priority)
    resident = [prio[t.id] for t in tasks if alloc[t.id] == target and t.id != task.id]
    prio[task.id] = max(resident) + 1 if resident else 0
    return cfg.replace(allocation=alloc, priority=prio)


def _tightest(task: Task) -> WeaklyHardConstraint:
    if task.constraints:
        return min(task.constraints, key=lambda c: (c.n, c.k))
    return WeaklyHardConstraint(0, 1)


def evaluate(
    cfg: SystemConfig,
    backend: str = "twca",
    threshold: float = 0.0,
    params: SaParams = SaParams(),
) -> Objective:
    """Penalized objective of a configuration.

    twca backend: schedulability and the per-controller miss budget come
    from the analytic bound; each controller is scored by the worst
    admissible pattern of its bounded (dmm, n) set; when the bound
    saturates the window the all-miss pattern is admissible, which
    normally scores unstable and steers the search away.  sim backend:
    exact scenario simulation; each controller is scored on its worst
    observed scenario pattern.
    """
    system = cfg.system
    costs: dict[str, control.CostResult] = {}
    weights: dict[str, float] = {}
    desired: dict[str, float] = {}
    if backend == "simulate":
        backend = "sim"
    if backend == "twca":
        report = twca.twca_verdict(cfg)
        violations = frozenset(t.task_id for t in report.tasks if not t.schedulable)
        for task in system.tasks:
            if task.control is None:
                continue
            dp = control.discretized(system.plants[task.control.plant_id])
            tight = _tightest(task)
            rec = report[task.id]
            k_eff = rec.dmm.get(tight.n)
            if k_eff is None:
                k_eff = twca.dmm_bound(task, tight.n, cfg)
            costs[task.id] = control.worst_cost_over(dp, k_eff, tight.n)
            weights[task.id] = task.control.weight
            desired[task.id] = task.control.j_des
    elif backend == "sim":
        verdict = simkit.event_sim_verdict(cfg)
        violations = verdict.violations
        for task in system.tasks:
            if task.control is None:
                continue
            dp = control.discretized(system.plants[task.control.plant_id])
            pattern = verdict.worst_patterns[task.id]
            costs[task.id] = control.control_cost(dp, pattern)
            weights[task.id] = task.control.weight
            desired[task.id] = task.control.j_des
    else:
        raise ModelError(f"unknown backend {backend!r}")
    cost, unstable = system_cost(costs, weights, desired)
    cov = coverage.coverage_single_error(cfg)
    coverage_ok = cov >= threshold - 1e-12
    schedulable = not violations
    penalized = (
        cost
        + params.penalty_sched * len(violations)
        + params.penalty_coverage * max(0.0, threshold - cov) * 100.0
        + params.penalty_stability * len(unstable)
    )
    return Objective(
        system_cost=cost,
        penalized=penalized,
        schedulable=schedulable,
        coverage=cov,
        coverage_ok=coverage_ok,
        stable=not unstable,
        violations=violations,
        unstable_tasks=frozenset(unstable),
    )


def sa_optimize(
    system: System,
    params: SaParams = SaParams(),
    backend: str = "twca",
    threshold: float = 0.0,
) -> tuple[SystemConfig, Objective]:
    """Simulated annealing from the heuristic initial solution.

    Improving moves are always accepted, worsening moves with
    probability exp(-delta/T); the temperature cools geometrically until
    t_star.  The best solution only ever tracks fully feasible
    configurations; if none is found the best-penalized configuration is
    returned with its (infeasible) objective.
    """
    rng = random.Random(params.seed)
    current = initial_solution(system, threshold)
    cur_obj = evaluate(current, backend, threshold, params)
    best: Optional[SystemConfig] = None
    best_obj: Optional[Objective] = None
    if cur_obj.feasible:
        best, best_obj = current, cur_obj
    fallback, fallback_obj = current, cur_obj
    t = params.t0
    while t > params.t_star:
        for _ in range(params.iter_max):
            cand = random_move(current, rng, params)
            cand_obj = evaluate(cand, backend, threshold, params)
            delta = cand_obj.penalized - cur_obj.penalized
            if delta <= 0 or rng.random() < math.exp(-delta / t):
                current, cur_obj = cand, cand_obj
            if cand_obj.feasible and (
                best_obj is None or cand_obj.system_cost < best_obj.system_cost
            ):
                best, best_obj = cand, cand_obj
            if cand_obj.penalized < fallback_obj.penalized:
                fallback, fallback_obj = cand, cand_obj
        logger.info(
            "T=%.4f current=%.4f best=%s feasible=%s",
            t,
            cur_obj.penalized,
            f"{best_obj.system_cost:.4f}" if best_obj is not None else "-",
            cur_obj.feasible,
        )
        t *= params.cooling_factor
    if best is not None:
        return best, best_obj
    return fallback, fallback_obj


@dataclass(frozen=True)
class FrontierPoint:
    """Best achievable coverage under one constraint regime."""

    coverage: float
    system_cost: float
    feasible: bool


def coverage_frontier(
    system: System, backend: str = "sim"
) -> tuple[FrontierPoint, FrontierPoint]:
    """Maximum achievable coverage under hard vs declared constraints.

    Walks the detection escalation chain (the same candidates the
    initial heuristic considers) and keeps the best coverage among
    candidates that are feasible with every constraint forced hard (0,1)
    and among candidates feasible with the declared weakly-hard
    constraints.  A candidate feasible under hard deadlines never misses,
    so it is feasible under the declared constraints too: the weakly-hard
    point dominates by construction.  Infeasible-everywhere regimes
    report coverage 0.0 and a nan cost.
    """
    hard_tasks = tuple(
        dataclasses.replace(t, constraints=(WeaklyHardConstraint(0, 1),))
        for t in system.tasks
    )
    hard_system = dataclasses.replace(system, tasks=hard_tasks)
    candidates = list(detection_escalation(system))
    # All-EOC minus one task: when full protection is unschedulable, the
    # escalation chain only ever demotes the highest-utilization task,
    # which costs the most coverage; try every single-task demotion too.
    for task in system.tasks:
        for level in (DetectionChoice.EED, DetectionChoice.NONE):
            candidate = {t.id: DetectionChoice.EOC for t in system.tasks}
            candidate[task.id] = level
            candidates.append(candidate)
    seen = set()
    best = {
        "hard": FrontierPoint(0.0, math.nan, False),
        "weak": FrontierPoint(0.0, math.nan, False),
    }
    for detection in candidates:
        key = tuple(sorted((tid, d.value) for tid, d in detection.items()))
        if key in seen:
            continue
        seen.add(key)
        regimes = (
            ("weak", _config(system, detection)),
            ("hard", _config(hard_system, detection)),
        )
        for regime, cfg in regimes:
            obj = evaluate(cfg, backend)
            if obj.feasible and (
                not best[regime].feasible or obj.coverage > best[regime].coverage
            ):
                best[regime] = FrontierPoint(obj.coverage, obj.system_cost, True)
    return best["hard"], best["weak"]
