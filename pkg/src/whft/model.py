"""Core domain types and arithmetic for weakly-hard fault-tolerant scheduling.

Tasks run periodically on homogeneous single-core CPUs under preemptive
fixed priorities.  A task may carry an error-detection mechanism (EED or
EOC) that inflates its worst-case execution time and, when a transient
error strikes, triggers a re-execution (recovery) job.  Deadline misses
are tolerated as long as every declared weakly-hard constraint (at most
k misses in any N consecutive activations) holds.

All durations are non-negative integer ticks; there is no floating point
anywhere in the scheduling arithmetic, so event simulation and
hyper-period LCMs are exact.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

# Time is a plain int (ticks).  The alias documents intent in signatures.
TimeTick = int

# Maximum tick value accepted before we call the model too large to be
# meaningful (guards hyperperiod blow-up on wild period sets).
MAX_TICK = 2**62


class ModelError(ValueError):
    """A model value violates a structural invariant."""


class DetectionChoice(enum.Enum):
    """Error-detection mechanism applied to a task.

    NONE: no detection, errors go unnoticed and cause no re-execution.
    EED:  embedded error detection, adds a fixed overhead delta_c per run.
    EOC:  explicit output comparison, runs the task twice plus a compare.
    """

    NONE = "none"
    EED = "eed"
    EOC = "eoc"

    @property
    def rho(self) -> int:
        # 1 iff any detection mechanism is applied
        return 0 if self is DetectionChoice.NONE else 1

    @property
    def o(self) -> int:
        # 1 iff the mechanism is output comparison
        return 1 if self is DetectionChoice.EOC else 0

    def escalated(self) -> "DetectionChoice":
        """One protection level up, saturating at EOC."""
        if self is DetectionChoice.NONE:
            return DetectionChoice.EED
        return DetectionChoice.EOC

    def cycled(self) -> "DetectionChoice":
        """Next choice in the NONE -> EED -> EOC -> NONE cycle."""
        order = (DetectionChoice.NONE, DetectionChoice.EED, DetectionChoice.EOC)
        return order[(order.index(self) + 1) % 3]


@dataclass(frozen=True, order=True)
class WeaklyHardConstraint:
    """At most `k` deadline misses in any `n` consecutive activations.

    (0, 1) is the hard-deadline special case.
    """

    k: int
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ModelError(f"window n must be positive, got {self.n}")
        if not 0 <= self.k < self.n:
            raise ModelError(f"need 0 <= k < n, got (k={self.k}, n={self.n})")

    @property
    def is_hard(self) -> bool:
        return self.k == 0 and self.n == 1


@dataclass(frozen=True)
class ControlBinding:
    """Links a task to the LTI plant it samples and actuates."""

    plant_id: str
    weight: float = 1.0
    j_des: float = 1.0

    def __post_init__(self) -> None:
        if self.weight < 0:
            raise ModelError(f"control weight must be >= 0, got {self.weight}")
        if self.j_des <= 0:
            raise ModelError(f"desired cost must be > 0, got {self.j_des}")


@dataclass(frozen=True)
class Task:
    """Periodic task with optional error detection and control binding.

    comparison_overhead is the output-comparison time (EOC); eed_overhead
    is the per-execution detection overhead (EED).  `detection` is the
    choice declared in the model file; the explorer may override it per
    configuration without touching the task itself.
    """

    id: str
    period: TimeTick
    deadline: TimeTick
    wcet: TimeTick
    comparison_overhead: TimeTick = 0
    eed_overhead: TimeTick = 0
    detection: DetectionChoice = DetectionChoice.NONE
    constraints: tuple[WeaklyHardConstraint, ...] = ()
    control: Optional[ControlBinding] = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ModelError("task id must be non-empty")
        if not 0 < self.wcet <= self.deadline <= self.period:
            raise ModelError(
                f"task {self.id}: need 0 < wcet <= deadline <= period, got "
                f"(c={self.wcet}, d={self.deadline}, t={self.period})"
            )
        if self.comparison_overhead < 0 or self.eed_overhead < 0:
            raise ModelError(f"task {self.id}: overheads must be >= 0")
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @property
    def utilization(self) -> float:
        return self.wcet / self.period


@dataclass(frozen=True)
class FaultModel:
    """Transient-error assumptions shared by all analyses.

    min_error_distance is the minimum gap between two error arrivals;
    with the default single-error model it equals the hyper-period (set
    at system construction when left as None).  alpha and beta are the
    detection rates of EED and EOC respectively.
    """

    min_error_distance: Optional[TimeTick] = None
    errors_per_hyperperiod: int = 1
    alpha: float = 0.7
    beta: float = 1.0

    def __post_init__(self) -> None:
        if self.min_error_distance is not None and self.min_error_distance <= 0:
            raise ModelError("min_error_distance must be positive")
        if self.errors_per_hyperperiod < 0:
            raise ModelError("errors_per_hyperperiod must be >= 0")
        for name, rate in (("alpha", self.alpha), ("beta", self.beta)):
            if not 0.0 <= rate <= 1.0:
                raise ModelError(f"{name} must be within [0,1], got {rate}")


@dataclass(frozen=True)
class Platform:
    """Homogeneous single-core CPUs."""

    cpu_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "cpu_ids", tuple(self.cpu_ids))
        if not self.cpu_ids:
            raise ModelError("platform needs at least one CPU")
        if len(set(self.cpu_ids)) != len(self.cpu_ids):
            raise ModelError("duplicate CPU ids")


@dataclass(frozen=True)
class MissPattern:
    """Hit/miss outcome per job instance; True marks a deadline miss."""

    task_id: str
    misses: tuple[bool, ...]
    base_index: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "misses", tuple(bool(m) for m in self.misses))
        if not self.misses:
            raise ModelError("miss pattern must be non-empty")

    def __len__(self) -> int:
        return len(self.misses)

    @property
    def miss_count(self) -> int:
        return sum(self.misses)

    @staticmethod
    def all_hit(task_id: str, length: int) -> "MissPattern":
        return MissPattern(task_id, (False,) * length)


# ---------------------------------------------------------------------------
# System bundle and the unit the explorer mutates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class System:
    """Immutable problem instance: tasks, platform, plants, fault model.

    Plants are kept as an opaque mapping here (plant ids to plant objects
    built by the control module) so the scheduling core stays free of any
    numerics dependency.
    """

    tasks: tuple[Task, ...]
    platform: Platform
    fault_model: FaultModel = FaultModel()
    plants: Mapping[str, object] = field(default_factory=dict)
    tick_seconds: float = 0.001

    def __post_init__(self) -> None:
        object.__setattr__(self, "tasks", tuple(self.tasks))
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ModelError("duplicate task ids")
        if self.tick_seconds <= 0:
            raise ModelError("tick_seconds must be positive")
        for t in self.tasks:
            if t.control is not None and t.control.plant_id not in self.plants:
                raise ModelError(
                    f"task {t.id} references unknown plant {t.control.plant_id!r}"
                )
        if self.fault_model.min_error_distance is None and self.tasks:
            fm = dataclasses.replace(
                self.fault_model, min_error_distance=hyperperiod(self.tasks)
            )
            object.__setattr__(self, "fault_model", fm)

    @property
    def hyperperiod(self) -> TimeTick:
        return hyperperiod(self.tasks)

    def task(self, task_id: str) -> Task:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(task_id)


@dataclass(frozen=True)
class SystemConfig:
    """One point in the design space: allocation, priorities, detection.

    priority: smaller value = higher priority, unique per CPU.
    detection overrides each task's declared choice; analyses always read
    the choice from here via `realized()`.
    """

    system: System
    allocation: Mapping[str, str]
    priority: Mapping[str, int]
    detection: Mapping[str, DetectionChoice]

    def __post_init__(self) -> None:
        alloc = dict(self.allocation)
        prio = dict(self.priority)
        det = dict(self.detection)
        object.__setattr__(self, "allocation", alloc)
        object.__setattr__(self, "priority", prio)
        object.__setattr__(self, "detection", det)
        cpus = set(self.system.platform.cpu_ids)
        for t in self.system.tasks:
            if t.id not in alloc:
                raise ModelError(f"task {t.id} has no CPU assignment")
            if alloc[t.id] not in cpus:
                raise ModelError(f"task {t.id} assigned to unknown CPU {alloc[t.id]!r}")
            if t.id not in prio:
                raise ModelError(f"task {t.id} has no priority")
            if t.id not in det:
                raise ModelError(f"task {t.id} has no detection choice")
        for cpu in cpus:
            prios = [prio[t.id] for t in self.system.tasks if alloc[t.id] == cpu]
            if len(set(prios)) != len(prios):
                raise ModelError(f"priority collision on CPU {cpu!r}")

    def realized(self, task: Task) -> Task:
        """Task with the configuration's detection choice applied."""
        choice = self.detection[task.id]
        if choice is task.detection:
            return task
        return dataclasses.replace(task, detection=choice)

    def tasks_on(self, cpu: str) -> tuple[Task, ...]:
        """Realized tasks on one CPU, highest priority first."""
        own = [t for t in self.system.tasks if self.allocation[t.id] == cpu]
        own.sort(key=lambda t: self.priority[t.id])
        return tuple(self.realized(t) for t in own)

    def replace(self, **kwargs) -> "SystemConfig":
        return dataclasses.replace(self, **kwargs)


# ---------------------------------------------------------------------------
# Execution-time and event-model arithmetic
# ---------------------------------------------------------------------------


def effective_wcet(task: Task) -> TimeTick:
    """Worst-case execution time including the detection mechanism.

    C = c + rho * (o * (c + comparison) + (1 - o) * delta_c): EOC doubles
    the run and adds the compare; EED adds its fixed overhead; no
    detection leaves the base WCET untouched.
    """
    rho = task.detection.rho
    o = task.detection.o
    return task.wcet + rho * (
        o * (task.wcet + task.comparison_overhead) + (1 - o) * task.eed_overhead
    )


def recovery_wcet(task: Task) -> TimeTick:
    """Budget of the re-execution job released when an error is detected.

    CR = rho * (c + (1 - o) * delta_c); zero without detection, plain
    re-run for EOC, re-run plus detection overhead for EED.
    """
    rho = task.detection.rho
    o = task.detection.o
    return rho * (task.wcet + (1 - o) * task.eed_overhead)


def event_bound(
    source: Task | FaultModel, window: TimeTick, klass: str = "typical"
) -> int:
    """Max number of activations of `source` inside any window of given length.

    Typical activations are the task's periodic releases; overload
    activations are error (recovery) arrivals limited by the fault
    model's minimum inter-error distance.  Lower and upper bounds
    coincide for strictly periodic sources, so a single function serves
    both.
    """
    if window < 0:
        raise ModelError(f"window must be >= 0, got {window}")
    if window == 0:
        return 0
    if klass == "typical":
        if not isinstance(source, Task):
            raise ModelError("typical event bound needs a task source")
        return -(-window // source.period)
    if klass == "overload":
        if isinstance(source, Task) and source.detection is DetectionChoice.NONE:
            return 0
        distance = (
            source.min_error_distance
            if isinstance(source, FaultModel)
            else None
        )
        if distance is None:
            raise ModelError("overload event bound needs a fault model distance")
        return -(-window // distance)
    raise ModelError(f"unknown event class {klass!r}")


def demand(task: Task, n: int, klass: str = "typical") -> TimeTick:
    """Service demand of n consecutive activations (n * C or n * CR)."""
    if n < 0:
        raise ModelError(f"n must be >= 0, got {n}")
    per_job = effective_wcet(task) if klass == "typical" else recovery_wcet(task)
    if klass not in ("typical", "overload"):
        raise ModelError(f"unknown event class {klass!r}")
    return n * per_job

def event_distance(task: Task, q: int, bound: str = "lower") -> TimeTick:
    """Distance spanned by q consecutive periodic activations: (q-1)*t.

    Lower and upper bounds agree for strictly periodic releases; the
    selector is kept for future jittered models.
    """
    if q < 1:
        raise ModelError(f"q must be >= 1, got {q}")
    if bound not in ("lower", "upper"):
        raise ModelError(f"unknown bound {bound!r}")
    return (q - 1) * task.period


def hyperperiod(tasks: Iterable[Task]) -> TimeTick:
    """Least common multiple of all task periods."""
    periods = [t.period for t in tasks]
    if not periods:
        raise ModelError("hyperperiod of an empty task set is undefined")
    lcm = math.lcm(*periods)
    if lcm > MAX_TICK:
        raise ModelError(f"hyperperiod {lcm} exceeds the tick range; model too large")
    return lcm


def sliding_window_misses(pattern: MissPattern | Sequence[bool], n: int) -> int:
    """Maximum number of misses in any window of n consecutive activations.

    The pattern is treated as embedded in an error-free (all-hit) run on
    both sides, so windows extending past either end pick up no extra
    misses.  Callers checking a scenario against its surrounding
    steady-state behaviour concatenate the flanking hyper-period patterns
    themselves before calling.
    """
    if n < 1:
        raise ModelError(f"window must be >= 1, got {n}")
    misses = pattern.misses if isinstance(pattern, MissPattern) else tuple(pattern)
    if not misses:
        raise ModelError("pattern must be non-empty")
    if n >= len(misses):
        return sum(misses)
    # One pass with a running window sum.
    current = sum(misses[:n])
    best = current
    for i in range(n, len(misses)):
        current += misses[i] - misses[i - n]
        if current > best:
            best = current
    return best


def satisfies_constraints(
    pattern: MissPattern | Sequence[bool], constraints: Iterable[WeaklyHardConstraint]
) -> bool:
    """True iff the pattern respects every (k, n) constraint."""
    return all(sliding_window_misses(pattern, c.n) <= c.k for c in constraints)
