"""Busy-window analysis and the deadline-miss bound.

The frozen numbers below come from iterating the demand equation by hand
for the 4-task example; every fixed point was also confirmed least by
the brute scan in `least_fixed_point`, which checks candidate values
directly instead of iterating.
"""

import random

import pytest

from whft import twca
from whft.model import (
    DetectionChoice,
    FaultModel,
    Platform,
    System,
    SystemConfig,
    effective_wcet,
    recovery_wcet,
    sliding_window_misses,
)
from whft.simkit import enumerate_scenarios, simulate_scenario
from whft.twca import (
    BusyWindowDivergence,
    analyze_task,
    busy_demand,
    busy_window,
    dmm_bound,
    miss_candidates,
    twca_verdict,
    wcrt,
)

from conftest import make_task, random_single_cpu_config, single_cpu_config


# ---------------------------------------------------------------------------
# the illustrating example, hand-iterated
# ---------------------------------------------------------------------------


def test_busy_demand_eoc_on_control_task(table1_eoc4):
    t4 = table1_eoc4.system.task("t4")
    # B = 2q + ceil(B/3) + ceil(B/5) + ceil(B/6) + ceil(B/30), upward from 2q:
    # q=1: 2 -> 6 -> 8 -> 10 -> 11 -> 12 -> 12
    assert busy_demand(t4, 1, table1_eoc4) == 12
    # q=2: 4 -> 9 -> 12 -> 14 -> 16 -> 18 -> 18
    assert busy_demand(t4, 2, table1_eoc4) == 18
    # q=3: 6 -> 12 -> 16 -> 20 -> 22 -> 24 -> 24
    assert busy_demand(t4, 3, table1_eoc4) == 24


def test_busy_window_eoc(table1_eoc4):
    t4 = table1_eoc4.system.task("t4")
    # B(1)=12 > 10, B(2)=18 <= 20: the window closes after two activations
    assert busy_window(t4, table1_eoc4) == (18, 2)


def test_wcrt_eoc(table1_eoc4):
    t4 = table1_eoc4.system.task("t4")
    # max(12 - 0, 18 - 10) = 12: the recovery burst overruns the deadline
    assert wcrt(t4, table1_eoc4) == 12


def test_miss_candidates_eoc(table1_eoc4):
    t4 = table1_eoc4.system.task("t4")
    # lags 12 and 8; only the first activation can overshoot d=10
    assert miss_candidates(t4, table1_eoc4) == {1}


def test_dmm_bound_eoc(table1_eoc4):
    t4 = table1_eoc4.system.task("t4")
    # one candidate, span 18 + 9*10 + 12 = 120, ceil(120/30) = 4 bursts
    assert dmm_bound(t4, 10, table1_eoc4) == 4
    assert dmm_bound(t4, 1, table1_eoc4) == 1  # capped at the window


def test_no_detection_variant(table1):
    t4 = table1.system.task("t4")
    # B = 1 + ceil(B/3) + ceil(B/5) + ceil(B/6): 1 -> 4 -> 5 -> 5
    assert busy_window(t4, table1) == (5, 1)
    assert wcrt(t4, table1) == 5
    assert miss_candidates(t4, table1) == set()
    assert dmm_bound(t4, 10, table1) == 0


def test_highest_priority_task_is_its_own_window(table1):
    t3 = table1.system.task("t3")
    assert busy_demand(t3, 1, table1) == 1
    assert busy_window(t3, table1) == (1, 1)


def test_verdicts(table1, table1_eoc4):
    assert twca_verdict(table1).schedulable
    report = twca_verdict(table1_eoc4)
    assert not report.schedulable
    assert not report["t4"].schedulable  # r=12 > d=10 under the hard (0,1)
    for other in ("t1", "t2", "t3"):
        # the recovery job runs at the control task's low priority and
        # cannot delay anyone above it
        assert report[other].schedulable


def test_empty_taskset_vacuously_schedulable():
    system = System((), Platform(("cpu0",)), FaultModel(min_error_distance=10))
    cfg = SystemConfig(system, {}, {}, {})
    assert twca_verdict(cfg).schedulable


# ---------------------------------------------------------------------------
# least fixed point, checked by scan instead of iteration
# ---------------------------------------------------------------------------


def least_fixed_point(task, q, higher, max_cr, dt_err, limit=4000):
    c = effective_wcet(task)
    for b in range(q * c, limit):
        total = q * c + max_cr * -(-b // dt_err)
        for other in higher:
            total += -(-b // other.period) * effective_wcet(other)
        if total == b:
            return b
    return None


def test_fixed_points_are_least(table1_eoc4):
    system = table1_eoc4.system
    t4 = system.task("t4")
    higher = [system.task(i) for i in ("t3", "t1", "t2")]
    t4r = table1_eoc4.realized(t4)
    for q, want in ((1, 12), (2, 18), (3, 24)):
        assert least_fixed_point(t4r, q, higher, 1, 30) == want
        assert busy_demand(t4, q, table1_eoc4) == want


@pytest.mark.parametrize("seed", range(25))
def test_busy_demand_monotone_and_least(seed):
    rng = random.Random(seed)
    cfg = random_single_cpu_config(rng)
    dt_err = cfg.system.fault_model.min_error_distance
    for task in cfg.system.tasks:
        rec = analyze_task(task, cfg)
        if not rec.converged:
            continue
        task_r = cfg.realized(task)
        own = cfg.priority[task.id]
        higher = [
            cfg.realized(t) for t in cfg.system.tasks
            if cfg.priority[t.id] < own
        ]
        max_cr = max(
            recovery_wcet(cfg.realized(t)) for t in cfg.system.tasks
            if cfg.priority[t.id] <= own
        )
        prev = 0
        for q, got in enumerate(rec.busy_demands, start=1):
            assert got == least_fixed_point(task_r, q, higher, max_cr, dt_err)
            assert got - prev >= effective_wcet(task_r)
            prev = got
        assert rec.wcrt >= effective_wcet(task_r)
        assert rec.wcrt <= rec.busy_window
        assert rec.miss_candidates <= set(range(1, rec.k_i + 1))
        for n, bound in rec.dmm.items():
            assert 0 <= bound <= n


# ---------------------------------------------------------------------------
# reduction to plain response-time analysis
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(15))
def test_reduces_to_classical_rta_without_detection(seed):
    rng = random.Random(1000 + seed)
    cfg = random_single_cpu_config(rng)
    cfg = cfg.replace(detection={t.id: DetectionChoice.NONE for t in cfg.system.tasks})
    for task in cfg.system.tasks:
        rec = analyze_task(task, cfg)
        own = cfg.priority[task.id]
        higher = [
            cfg.realized(t) for t in cfg.system.tasks
            if cfg.priority[t.id] < own
        ]
        r = least_fixed_point(cfg.realized(task), 1, higher, 0, 10**9)
        if rec.converged and rec.k_i == 1:
            # the single-activation case is the textbook recurrence
            assert rec.wcrt == r
        if r is not None and r <= task.period:
            assert rec.converged and rec.busy_demands[0] == r


# ---------------------------------------------------------------------------
# typical-load infeasibility
# ---------------------------------------------------------------------------


def test_typical_overload_pins_dmm_to_window():
    # "lo" misses its deadline with no error anywhere in the system:
    # B(1) = 2 + ceil(B/2) -> 4, lag 4 > deadline 3.  Such misses recur
    # every busy period, so the per-burst bound does not apply and the
    # report falls back to the window size.
    cfg = single_cpu_config([
        make_task("hi", period=2, wcet=1),
        make_task("lo", period=4, wcet=2, deadline=3, constraints=((1, 5),)),
    ])
    lo = cfg.system.task("lo")
    rec = analyze_task(lo, cfg)
    assert rec.converged
    assert not rec.typical_feasible
    assert rec.dmm[5] == 5
    assert not rec.schedulable
    assert dmm_bound(lo, 5, cfg) == 5


def test_typical_overload_gate_with_recovery_load():
    # same typical overload, but a protected task above contributes a
    # recovery term; the gate has to strip that term and still notice
    # the typical model alone is late
    cfg = single_cpu_config(
        [
            make_task("hi", period=4, wcet=1, detection="eoc"),
            make_task("lo", period=12, wcet=3, deadline=4,
                      constraints=((2, 6),)),
        ],
        fault_model=FaultModel(min_error_distance=1000),
    )
    # full model: B = 3 + 2*ceil(B/4) + ceil(B/1000) -> 8, closes at q=1
    # typical:    B = 3 + 2*ceil(B/4)               -> 7, lag 7 > 4
    rec = analyze_task(cfg.system.task("lo"), cfg)
    assert rec.converged
    assert not rec.typical_feasible
    assert rec.dmm[6] == 6


# ---------------------------------------------------------------------------
# divergence handling
# ---------------------------------------------------------------------------


def test_overloaded_taskset_diverges():
    cfg = single_cpu_config(
        [make_task("hog", period=2, wcet=2), make_task("low", period=4, wcet=1)]
    )
    rec = analyze_task(cfg.system.task("low"), cfg)
    assert not rec.converged and not rec.schedulable
    assert dmm_bound(cfg.system.task("low"), 7, cfg) == 7  # no bound: pinned
    with pytest.raises(BusyWindowDivergence):
        busy_window(cfg.system.task("low"), cfg)
    assert not twca_verdict(cfg).schedulable


def test_exactly_full_utilization_converges():
    # 1/2 + 1/2 = 1: windows still close right at the next release
    cfg = single_cpu_config(
        [make_task("a", period=2, wcet=1), make_task("b", period=2, wcet=1)]
    )
    assert busy_window(cfg.system.task("b"), cfg) == (2, 1)
    assert wcrt(cfg.system.task("b"), cfg) == 2


def test_recovery_load_can_diverge_alone():
    # typical load fits, but an error every 4 ticks adds CR=2 at the top
    # priority: 1/2 + 2/4 = 1 of interference leaves no room for "low"
    fm = FaultModel(min_error_distance=4)
    cfg = single_cpu_config(
        [
            make_task("hi", period=2, wcet=1, detection="eoc"),
            make_task("low", period=8, wcet=1),
        ],
        fault_model=fm,
    )
    assert not analyze_task(cfg.system.task("low"), cfg).converged


# ---------------------------------------------------------------------------
# soundness against the exact simulator
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(40))
def test_dmm_bound_covers_every_scenario(seed):
    rng = random.Random(7000 + seed)
    cfg = random_single_cpu_config(rng)
    observed: dict[str, dict[int, int]] = {
        t.id: {c.n: 0 for c in t.constraints} for t in cfg.system.tasks
    }
    error_free = simulate_scenario(cfg, "cpu0", enumerate_scenarios(cfg, "cpu0")[0])
    flank = {t.id: error_free.patterns[t.id].misses for t in cfg.system.tasks}
    for scenario in enumerate_scenarios(cfg, "cpu0"):
        outcome = simulate_scenario(cfg, "cpu0", scenario)
        for t in cfg.system.tasks:
            padded = flank[t.id] + outcome.patterns[t.id].misses + flank[t.id]
            for c in t.constraints:
                observed[t.id][c.n] = max(
                    observed[t.id][c.n], sliding_window_misses(padded, c.n)
                )
    for t in cfg.system.tasks:
        for c in t.constraints:
            assert dmm_bound(t, c.n, cfg) >= observed[t.id][c.n], (
                f"seed {seed}: dmm bound below simulated misses for {t.id}"
            )
