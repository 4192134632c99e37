"""Error-coverage metric: probability a transient error is harmless.

An error is covered when it is detected (EED with rate alpha, EOC with
rate beta) or lands in idle time.  The single-error approximation used
as the optimizer constraint charges each task its busy share weighted by
its escape rate; the general form handles K uniformly placed errors from
explicit per-class time shares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import (
    DetectionChoice,
    FaultModel,
    ModelError,
    SystemConfig,
    Task,
    TimeTick,
    effective_wcet,
)


@dataclass(frozen=True)
class CoverageInputs:
    """Per-CPU time shares of one hyper-period, split by detection class."""

    t_eed: TimeTick
    t_eoc: TimeTick
    t_none: TimeTick
    t_idle: TimeTick
    t_hyper: TimeTick
    alpha: float = 0.7
    beta: float = 1.0

    def __post_init__(self) -> None:
        shares = (self.t_eed, self.t_eoc, self.t_none, self.t_idle)
        if any(s < 0 for s in shares):
            raise ModelError("time shares must be non-negative")
        if sum(shares) != self.t_hyper:
            raise ModelError(
                f"time shares sum to {sum(shares)}, expected hyper-period {self.t_hyper}"
            )
        for name, rate in (("alpha", self.alpha), ("beta", self.beta)):
            if not 0.0 <= rate <= 1.0:
                raise ModelError(f"{name} must be within [0,1], got {rate}")


def detection_rate(task: Task, fault_model: FaultModel = FaultModel()) -> float:
    """Probability an error during this task's execution is detected."""
    if task.detection is DetectionChoice.NONE:
        return 0.0
    if task.detection is DetectionChoice.EED:
        return fault_model.alpha
    return fault_model.beta


def coverage_single_error(cfg: SystemConfig, global_sum: bool = False) -> float:
    """Single-error coverage of a configuration, clamped to [0, 1].

    Per CPU: P_cpu = 1 - sum over its tasks of (1 - eps_i) * C_i / t_i.
    The platform value averages the per-CPU coverages (the error lands
    on a uniformly random CPU); `global_sum` switches to the reading
    that charges all tasks against a single budget, which lower-bounds
    the average and is allocation-independent.
    """
    fm = cfg.system.fault_model
    if global_sum:
        escape = sum(
            (1.0 - detection_rate(cfg.realized(t), fm))
            * effective_wcet(cfg.realized(t)) / t.period
            for t in cfg.system.tasks
        )
        return min(1.0, max(0.0, 1.0 - escape))
    total = 0.0
    for cpu in cfg.system.platform.cpu_ids:
        escape = sum(
            (1.0 - detection_rate(t, fm)) * effective_wcet(t) / t.period
            for t in cfg.tasks_on(cpu)
        )
        total += min(1.0, max(0.0, 1.0 - escape))
    return total / len(cfg.system.platform.cpu_ids)


def coverage_general(inputs: CoverageInputs, errors: int) -> float:
    """Coverage under `errors` uniformly distributed independent errors.

    Double binomial sum over how many errors land in EED time (detected
    with rate alpha each) and EOC time (rate beta), with the remainder
    required to land idle.  Collapses algebraically to the K-th power of
    the single-error value.
    """
    if errors < 0:
        raise ModelError(f"error count must be >= 0, got {errors}")
    t = inputs.t_hyper
    p_eed = inputs.alpha * inputs.t_eed / t
    p_eoc = inputs.beta * inputs.t_eoc / t
    p_idle = inputs.t_idle / t
    total = 0.0
    for i in range(errors + 1):
        for j in range(i + 1):
            total += (
                math.comb(errors, i)
                * math.comb(i, j)
                * p_eed**j
                * p_eoc ** (i - j)
                * p_idle ** (errors - i)
            )
    return total


def coverage_inputs(cfg: SystemConfig, cpu: str) -> CoverageInputs:
    """Detection-class time shares of one CPU over a hyper-period.

    Busy time per class equals the summed job budgets of that class: in
    the error-free run every released job executes its full budget, so
    this matches the simulator's accounting exactly (conservation).
    """
    hyper = cfg.system.hyperperiod
    shares = {DetectionChoice.NONE: 0, DetectionChoice.EED: 0, DetectionChoice.EOC: 0}
    for task in cfg.tasks_on(cpu):
        shares[task.detection] += (hyper // task.period) * effective_wcet(task)
    busy = sum(shares.values())
    if busy > hyper:
        raise ModelError(f"CPU {cpu!r} is overloaded: busy {busy} > {hyper}")
    fm = cfg.system.fault_model
    return CoverageInputs(
        t_eed=shares[DetectionChoice.EED],
        t_eoc=shares[DetectionChoice.EOC],
        t_none=shares[DetectionChoice.NONE],
        t_idle=hyper - busy,
        t_hyper=hyper,
        alpha=fm.alpha,
        beta=fm.beta,
    )
