"""Shared fixtures and helpers for the test suite.

The 4-task single-CPU example (periods 3/5/6/10, unit WCETs, hyper-period
30) appears across the suite in three detection variants: unprotected,
output-comparison on the control task, and the weakly-hard (2,10) relax
of the control task's deadline.  All hand-derived oracle values in the
tests refer to this set.
"""

import dataclasses
import random
import re
from importlib import resources

import pytest

from whft import cli
from whft.model import (
    DetectionChoice,
    FaultModel,
    Platform,
    System,
    SystemConfig,
    Task,
    WeaklyHardConstraint,
)


def fixture_path(name: str) -> str:
    return str(resources.files("whft.data") / name)


@pytest.fixture(scope="session")
def table1() -> SystemConfig:
    return cli.parse_config(fixture_path("table1.json"))


def with_detection(cfg: SystemConfig, **choices: str) -> SystemConfig:
    det = dict(cfg.detection)
    for task_id, choice in choices.items():
        det[task_id] = DetectionChoice(choice)
    return cfg.replace(detection=det)


def with_constraints(
    cfg: SystemConfig, task_id: str, *pairs: tuple[int, int]
) -> SystemConfig:
    """Same configuration with one task's weakly-hard constraints replaced."""
    tasks = tuple(
        dataclasses.replace(
            t, constraints=tuple(WeaklyHardConstraint(k, n) for k, n in pairs)
        )
        if t.id == task_id
        else t
        for t in cfg.system.tasks
    )
    system = dataclasses.replace(cfg.system, tasks=tasks)
    return SystemConfig(system, cfg.allocation, cfg.priority, cfg.detection)


@pytest.fixture
def table1_eoc4(table1) -> SystemConfig:
    # the illustrating fault-tolerance variant: EOC on the control task
    return with_detection(table1, t4="eoc")


def make_task(task_id="t", period=10, wcet=1, deadline=None, detection="none",
              delta_c=0, lam=0, constraints=((0, 1),), control=None):
    return Task(
        id=task_id,
        period=period,
        deadline=period if deadline is None else deadline,
        wcet=wcet,
        comparison_overhead=lam,
        eed_overhead=delta_c,
        detection=DetectionChoice(detection),
        constraints=tuple(WeaklyHardConstraint(k, n) for k, n in constraints),
        control=control,
    )


def single_cpu_config(tasks, fault_model=None, priorities=None) -> SystemConfig:
    """Wrap a task list into a one-CPU configuration, priority by order."""
    system = System(
        tasks=tuple(tasks),
        platform=Platform(("cpu0",)),
        fault_model=fault_model or FaultModel(),
    )
    order = priorities or {t.id: i for i, t in enumerate(tasks)}
    return SystemConfig(
        system,
        allocation={t.id: "cpu0" for t in tasks},
        priority=order,
        detection={t.id: t.detection for t in tasks},
    )


# pool keeps hyper-periods <= 120 so exhaustive scenario sweeps stay cheap
_PERIOD_POOL = (4, 5, 6, 8, 10, 12, 20, 24, 30)
_CHOICES = (DetectionChoice.NONE, DetectionChoice.EED, DetectionChoice.EOC)


def random_single_cpu_config(rng: random.Random) -> SystemConfig:
    """Small random taskset for soundness sweeps: 3-8 tasks, utilization
    drawn in [0.3, 0.9], random detection, 1-2 random windows per task."""
    n = rng.randint(3, 8)
    target = rng.uniform(0.3, 0.9)
    utils = cli.uunifast(n, target, rng)
    tasks = []
    for i, u in enumerate(utils):
        period = rng.choice(_PERIOD_POOL)
        wcet = max(1, min(period, round(u * period)))
        windows = []
        for _ in range(rng.randint(1, 2)):
            win = rng.randint(2, 12)
            windows.append((rng.randint(0, win - 1), win))
        tasks.append(
            make_task(
                task_id=f"t{i}",
                period=period,
                wcet=wcet,
                detection=rng.choice(_CHOICES).value,
                delta_c=rng.randint(0, 1),
                lam=rng.randint(0, 1),
                constraints=windows,
            )
        )
    return single_cpu_config(tasks)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Repeat the acceptance verdicts as a one-line-per-criterion list."""
    verdicts: dict[int, bool] = {}
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            match = re.search(r"test_criterion_(\d+)", getattr(report, "nodeid", ""))
            if match:
                num = int(match.group(1))
                verdicts[num] = verdicts.get(num, True) and outcome == "passed"
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for num in sorted(verdicts):
            word = "PASS" if verdicts[num] else "FAIL"
            terminalreporter.write_line(f"acceptance criterion {num}: {word}")
