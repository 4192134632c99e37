"""Weakly-hard fault-tolerant scheduling toolkit.

Decides which error-detection technique each real-time task gets, where
it runs, and at what priority, so that weakly-hard deadline-miss
constraints, control stability, and an error-coverage requirement all
hold while a control-cost objective is minimized.
"""

__version__ = "0.1.0"

from .model import (
    ControlBinding,
    DetectionChoice,
    FaultModel,
    MissPattern,
    ModelError,
    Platform,
    System,
    SystemConfig,
    Task,
    TimeTick,
    WeaklyHardConstraint,
    effective_wcet,
    hyperperiod,
    recovery_wcet,
    sliding_window_misses,
)

__all__ = [
    "ControlBinding",
    "DetectionChoice",
    "FaultModel",
    "MissPattern",
    "ModelError",
    "Platform",
    "System",
    "SystemConfig",
    "Task",
    "TimeTick",
    "WeaklyHardConstraint",
    "effective_wcet",
    "hyperperiod",
    "recovery_wcet",
    "sliding_window_misses",
]
