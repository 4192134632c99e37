"""Coverage arithmetic against hand-computed shares.

Single-error values for the 4-task set are simple fractions over the
30-tick hyper-period and are asserted as such; the general K-error form
is pinned to a worked double-binomial example and to its algebraic
collapse into a power of the single-error value.
"""

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from whft import cli
from whft.coverage import (
    CoverageInputs,
    coverage_general,
    coverage_inputs,
    coverage_single_error,
    detection_rate,
)
from whft.model import DetectionChoice, FaultModel, ModelError

from conftest import (
    fixture_path,
    make_task,
    random_single_cpu_config,
    single_cpu_config,
    with_detection,
)


def test_detection_rate_defaults():
    assert detection_rate(make_task(detection="none")) == 0.0
    assert detection_rate(make_task(detection="eed")) == 0.7
    assert detection_rate(make_task(detection="eoc")) == 1.0


def test_detection_rate_follows_fault_model():
    fm = FaultModel(alpha=0.5, beta=0.9)
    assert detection_rate(make_task(detection="eed"), fm) == 0.5
    assert detection_rate(make_task(detection="eoc"), fm) == 0.9


# ---------------------------------------------------------------------------
# single-error coverage of the 4-task example
# ---------------------------------------------------------------------------


def test_unprotected_coverage(table1):
    # escape = 1/5 + 1/6 + 1/3 + 1/10 = 0.8
    assert coverage_single_error(table1) == pytest.approx(0.2, rel=1e-12)


def test_escalating_the_control_task(table1):
    # none: 0.1 escape share; eed: 0.3 * 2/10; eoc: zero escape
    values = [
        coverage_single_error(with_detection(table1, t4=choice))
        for choice in ("none", "eed", "eoc")
    ]
    assert values == pytest.approx([0.2, 0.24, 0.3], rel=1e-12)
    assert values[0] < values[1] < values[2]


def test_eed_pair(table1):
    cfg = with_detection(table1, t2="eed", t4="eed")
    # 1 - (1/5 + 0.3*2/6 + 1/3 + 0.3*2/10)
    assert coverage_single_error(cfg) == pytest.approx(0.3066666666, rel=1e-9)


def test_full_protection_is_exact_one(table1):
    cfg = with_detection(table1, t1="eoc", t2="eoc", t3="eoc", t4="eoc")
    assert coverage_single_error(cfg) == 1.0


def test_clamped_at_zero_when_overloaded():
    cfg = single_cpu_config([
        make_task("a", period=4, wcet=4),
        make_task("b", period=4, wcet=4),
    ])
    assert coverage_single_error(cfg) == 0.0
    assert coverage_single_error(cfg, global_sum=True) == 0.0


def test_global_sum_lower_bounds_the_average():
    cfg = cli.parse_config(fixture_path("waters9.json"))
    lo = coverage_single_error(cfg, global_sum=True)
    hi = coverage_single_error(cfg)
    assert lo <= hi + 1e-12
    # two of the four CPUs are idle and contribute full coverage
    assert hi >= 0.5


@pytest.mark.parametrize("seed", range(5))
def test_single_cpu_readings_coincide(seed):
    cfg = random_single_cpu_config(random.Random(300 + seed))
    assert coverage_single_error(cfg) == coverage_single_error(cfg, global_sum=True)


# ---------------------------------------------------------------------------
# per-class time shares
# ---------------------------------------------------------------------------


def test_shares_of_the_example(table1_eoc4):
    inputs = coverage_inputs(table1_eoc4, "cpu0")
    assert inputs == CoverageInputs(
        t_eed=0, t_eoc=6, t_none=21, t_idle=3, t_hyper=30, alpha=0.7, beta=1.0
    )


def test_shares_reject_overloaded_cpu(table1):
    # both upgrades carry a +1 budget: 6 + 10 + 5*2 + 3*2 = 32 > 30
    cfg = with_detection(table1, t2="eed", t4="eed")
    with pytest.raises(ModelError):
        coverage_inputs(cfg, "cpu0")


def test_inputs_validation():
    with pytest.raises(ModelError):
        CoverageInputs(t_eed=-1, t_eoc=0, t_none=0, t_idle=1, t_hyper=0)
    with pytest.raises(ModelError):
        CoverageInputs(t_eed=1, t_eoc=1, t_none=1, t_idle=1, t_hyper=5)
    with pytest.raises(ModelError):
        CoverageInputs(t_eed=1, t_eoc=0, t_none=0, t_idle=0, t_hyper=1, alpha=1.5)


# ---------------------------------------------------------------------------
# K-error coverage
# ---------------------------------------------------------------------------


def test_general_hand_example():
    inputs = CoverageInputs(t_eed=10, t_eoc=10, t_none=5, t_idle=5, t_hyper=30)
    # 0.7*10/30 detected in EED time, 10/30 in EOC time, 5/30 idle
    assert coverage_general(inputs, 1) == pytest.approx(22 / 30, rel=1e-12)
    assert coverage_general(inputs, 2) == pytest.approx((22 / 30) ** 2, rel=1e-12)
    assert coverage_general(inputs, 0) == 1.0


def test_general_rejects_negative_count():
    inputs = CoverageInputs(t_eed=0, t_eoc=0, t_none=0, t_idle=1, t_hyper=1)
    with pytest.raises(ModelError):
        coverage_general(inputs, -1)


@given(
    shares=st.tuples(
        st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(1, 50)
    ),
    alpha=st.floats(0.0, 1.0),
    beta=st.floats(0.0, 1.0),
    errors=st.integers(0, 6),
)
def test_general_collapses_to_a_power(shares, alpha, beta, errors):
    eed, eoc, none, idle = shares
    inputs = CoverageInputs(
        t_eed=eed, t_eoc=eoc, t_none=none, t_idle=idle,
        t_hyper=eed + eoc + none + idle, alpha=alpha, beta=beta,
    )
    one = coverage_general(inputs, 1)
    assert coverage_general(inputs, errors) == pytest.approx(one**errors, abs=1e-9)


# seeds whose drawn set fits in the hyper-period once enough detection
# overhead is shed; others are raw-overloaded and have no share split
@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4, 5, 8, 9, 12, 13])
def test_general_agrees_with_single_error_reading(seed):
    # [t_idle + a*t_eed + b*t_eoc] / T is the same number as
    # 1 - sum (1-eps) C/t whenever the CPU is not overloaded
    cfg = random_single_cpu_config(random.Random(seed))
    det = dict(cfg.detection)
    while True:
        cfg = cfg.replace(detection=det)
        try:
            inputs = coverage_inputs(cfg, "cpu0")
            break
        except ModelError:
            tid = next(
                t.id for t in cfg.system.tasks
                if det[t.id] is not DetectionChoice.NONE
            )
            det[tid] = DetectionChoice.NONE
    assert coverage_general(inputs, 1) == pytest.approx(
        coverage_single_error(cfg), abs=1e-12
    )
