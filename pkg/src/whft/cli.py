"""Model file I/O, synthetic workload generation, and the command line.

Model files are JSON with top-level keys `platform`, `fault_model`,
`tasks` and `plants`; see README for the schema.  Commands: `analyze`
(analytic miss bounds), `simulate` (exact per-scenario outcomes),
`optimize` (annealing search), `sweep` (utilization grid CSV), `generate`
(synthetic model files) and `bench` (compiled vs pure kernel timing).

Exit codes: 0 ok, 1 result infeasible/unschedulable, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from typing import Optional, Sequence

from . import __version__, _kernels, control, explore, simkit, twca
from .model import (
    ControlBinding,
    DetectionChoice,
    FaultModel,
    ModelError,
    Platform,
    System,
    SystemConfig,
    Task,
    WeaklyHardConstraint,
)

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_INPUT = 2

SWEEP_SCHEMA = "whft-sweep-1"
SWEEP_COLUMNS = (
    "schema",
    "utilization",
    "threshold",
    "seed",
    "hard_coverage",
    "coverage",
    "system_cost",
    "feasible",
    "runtime_s",
)

# Generator defaults: the pool keeps the hyper-period at 600 ticks; the
# weakly-hard ranges follow the experiment grid (k in 0..4, n in 10..20).
DEFAULT_PERIOD_POOL = (30, 50, 60, 100, 150, 200, 300)
DEFAULT_WH_RANGES = ((0, 4), (10, 20))


# ---------------------------------------------------------------------------
# Model file parsing
# ---------------------------------------------------------------------------


_MISSING = object()


def _field(obj, key, path, default=_MISSING):
    if key in obj:
        return obj[key]
    if default is _MISSING:
        raise ModelError(f"{path}: missing required field {key!r}")
    return default


def _matrix(value, path):
    if not isinstance(value, list) or not value or not all(
        isinstance(row, list) and row for row in value
    ):
        raise ModelError(f"{path}: expected a non-empty nested array")
    return tuple(tuple(float(x) for x in row) for row in value)


def _parse_plant(obj, path) -> control.LtiPlant:
    try:
        return control.LtiPlant(
            id=str(_field(obj, "id", path)),
            a=_matrix(_field(obj, "A", path), f"{path}.A"),
            b=_matrix(_field(obj, "B", path), f"{path}.B"),
            c_out=_matrix(_field(obj, "C", path), f"{path}.C"),
            gain=_matrix(_field(obj, "K", path), f"{path}.K"),
            sampling_period=float(_field(obj, "h", path)),
            let_deadline=float(_field(obj, "D", path)),
            cost_threshold=float(_field(obj, "j_th", path, 0.01)),
            horizon_cap=int(_field(obj, "h_max", path, control.DEFAULT_HORIZON)),
        )
    except ModelError as exc:
        raise ModelError(f"{path}: {exc}") from None


def _parse_detection(value, path) -> DetectionChoice:
    try:
        return DetectionChoice(str(value))
    except ValueError:
        raise ModelError(
            f"{path}: unknown detection {value!r} (expected none/eed/eoc)"
        ) from None


def _parse_task(obj, path) -> tuple[Task, Optional[str], Optional[int]]:
    constraints = []
    for i, pair in enumerate(_field(obj, "constraints", path, [])):
        cpath = f"{path}.constraints[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise ModelError(f"{cpath}: expected a [k, N] pair")
        try:
            constraints.append(WeaklyHardConstraint(int(pair[0]), int(pair[1])))
        except ModelError as exc:
            raise ModelError(f"{cpath}: {exc}") from None
    control_obj = _field(obj, "control", path, None)
    binding = None
    if control_obj is not None:
        cpath = f"{path}.control"
        binding = ControlBinding(
            plant_id=str(_field(control_obj, "plant", cpath)),
            weight=float(_field(control_obj, "weight", cpath, 1.0)),
            j_des=float(_field(control_obj, "j_des", cpath, 1.0)),
        )
    try:
        task = Task(
            id=str(_field(obj, "id", path)),
            period=int(_field(obj, "period", path)),
            deadline=int(_field(obj, "deadline", path)),
            wcet=int(_field(obj, "wcet", path)),
            comparison_overhead=int(_field(obj, "lambda", path, 0)),
            eed_overhead=int(_field(obj, "delta_c", path, 0)),
            detection=_parse_detection(_field(obj, "detection", path, "none"), path),
            constraints=tuple(constraints),
            control=binding,
        )
    except ModelError as exc:
        raise ModelError(f"{path}: {exc}") from None
    cpu = obj.get("cpu")
    priority = obj.get("priority")
    return task, cpu, None if priority is None else int(priority)


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ModelError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON: {exc}") from None


def parse_config(path: str) -> SystemConfig:
    """Parse and fully validate a model file into a configured system.

    Tasks without a `cpu` key go to the only CPU (an error on multi-CPU
    platforms); priorities default to deadline-monotonic (ties by id)
    when no task declares one.
    """
    doc = _load_json(path)
    if not isinstance(doc, dict):
        raise ModelError(f"{path}: top level must be an object")
    platform_obj = _field(doc, "platform", path)
    cpus = _field(platform_obj, "cpus", f"{path}.platform")
    if not isinstance(cpus, list) or not all(isinstance(c, str) for c in cpus):
        raise ModelError(f"{path}.platform.cpus: expected an array of CPU ids")
    try:
        platform = Platform(tuple(cpus))
    except ModelError as exc:
        raise ModelError(f"{path}.platform: {exc}") from None
    tick_seconds = float(_field(platform_obj, "tick_seconds", f"{path}.platform", 0.001))

    fm_obj = _field(doc, "fault_model", path, {})
    fm_path = f"{path}.fault_model"
    med = _field(fm_obj, "min_error_distance", fm_path, None)
    try:
        fault_model = FaultModel(
            min_error_distance=None if med is None else int(med),
            errors_per_hyperperiod=int(_field(fm_obj, "errors_per_hyperperiod", fm_path, 1)),
            alpha=float(_field(fm_obj, "alpha", fm_path, 0.7)),
            beta=float(_field(fm_obj, "beta", fm_path, 1.0)),
        )
    except ModelError as exc:
        raise ModelError(f"{fm_path}: {exc}") from None

    plants = {}
    for i, pobj in enumerate(_field(doc, "plants", path, [])):
        plant = _parse_plant(pobj, f"{path}.plants[{i}]")
        if plant.id in plants:
            raise ModelError(f"{path}.plants[{i}]: duplicate plant id {plant.id!r}")
        plants[plant.id] = plant

    tasks = []
    cpu_of: dict[str, Optional[str]] = {}
    prio_of: dict[str, Optional[int]] = {}
    for i, tobj in enumerate(_field(doc, "tasks", path, [])):
        task, cpu, priority = _parse_task(tobj, f"{path}.tasks[{i}]")
        tasks.append(task)
        cpu_of[task.id] = cpu
        prio_of[task.id] = priority

    try:
        system = System(
            tasks=tuple(tasks),
            platform=platform,
            fault_model=fault_model,
            plants=plants,
            tick_seconds=tick_seconds,
        )
    except ModelError as exc:
        raise ModelError(f"{path}: {exc}") from None

    allocation = {}
    for task in tasks:
        cpu = cpu_of[task.id]
        if cpu is None:
            if len(platform.cpu_ids) != 1:
                raise ModelError(
                    f"{path}: task {task.id!r} needs a cpu on a multi-CPU platform"
                )
            cpu = platform.cpu_ids[0]
        elif cpu not in platform.cpu_ids:
            raise ModelError(f"{path}: task {task.id!r} assigned to unknown cpu {cpu!r}")
        allocation[task.id] = cpu

    declared = [p for p in prio_of.values() if p is not None]
    if declared and len(declared) != len(tasks):
        raise ModelError(f"{path}: either every task declares a priority or none does")
    if declared:
        priority = {tid: p for tid, p in prio_of.items()}
    else:
        priority = {}
        for cpu in platform.cpu_ids:
            own = sorted(
                (t for t in tasks if allocation[t.id] == cpu),
                key=lambda t: (t.deadline, t.id),
            )
            for level, task in enumerate(own):
                priority[task.id] = level

    detection = {t.id: t.detection for t in tasks}
    try:
        return SystemConfig(
            system=system, allocation=allocation, priority=priority, detection=detection
        )
    except ModelError as exc:
        raise ModelError(f"{path}: {exc}") from None


def parse_model(path: str) -> System:
    """Parse a model file, dropping the configuration part."""
    return parse_config(path).system


def emit_model(cfg: SystemConfig, note: Optional[str] = None) -> str:
    """Serialize a configured system to the model file format.

    Inverse of parse_config: parse_config(emit_model(cfg)) == cfg.
    """
    system = cfg.system
    doc: dict = {}
    if note:
        doc["_note"] = note
    doc["platform"] = {
        "cpus": list(system.platform.cpu_ids),
        "tick_seconds": system.tick_seconds,
    }
    fm = system.fault_model
    doc["fault_model"] = {
        "min_error_distance": fm.min_error_distance,
        "errors_per_hyperperiod": fm.errors_per_hyperperiod,
        "alpha": fm.alpha,
        "beta": fm.beta,
    }
    doc["tasks"] = []
    for task in system.tasks:
        entry = {
            "id": task.id,
            "period": task.period,
            "deadline": task.deadline,
            "wcet": task.wcet,
            "lambda": task.comparison_overhead,
            "delta_c": task.eed_overhead,
            "detection": cfg.detection[task.id].value,
            "constraints": [[c.k, c.n] for c in task.constraints],
            "cpu": cfg.allocation[task.id],
            "priority": cfg.priority[task.id],
        }
        if task.control is not None:
            entry["control"] = {
                "plant": task.control.plant_id,
                "weight": task.control.weight,
                "j_des": task.control.j_des,
            }
        doc["tasks"].append(entry)
    doc["plants"] = [
        {
            "id": plant.id,
            "A": [list(row) for row in plant.a],
            "B": [list(row) for row in plant.b],
            "C": [list(row) for row in plant.c_out],
            "h": plant.sampling_period,
            "D": plant.let_deadline,
            "K": [list(row) for row in plant.gain],
            "j_th": plant.cost_threshold,
            "h_max": plant.horizon_cap,
        }
        for plant in (system.plants[pid] for pid in sorted(system.plants))
    ]
    return json.dumps(doc, indent=1) + "\n"


def _scale_wcets(cfg: SystemConfig, scale: float) -> SystemConfig:
    """Multiply every WCET by `scale` (minimum one tick)."""
    if scale == 1.0:
        return cfg
    if scale <= 0:
        raise ModelError(f"--scale must be positive, got {scale}")
    tasks = tuple(
        dataclasses.replace(t, wcet=max(1, round(t.wcet * scale)))
        for t in cfg.system.tasks
    )
    system = dataclasses.replace(cfg.system, tasks=tasks)
    return SystemConfig(
        system=system,
        allocation=cfg.allocation,
        priority=cfg.priority,
        detection=cfg.detection,
    )


# ---------------------------------------------------------------------------
# Synthetic workload generation
# ---------------------------------------------------------------------------


def uunifast(n: int, total: float, rng: random.Random) -> list[float]:
    """Uniform utilization split: n values summing to `total`."""
    out = []
    remaining = total
    for i in range(1, n):
        nxt = remaining * rng.random() ** (1.0 / (n - i))
        out.append(remaining - nxt)
        remaining = nxt
    out.append(remaining)
    return out


def demo_plants() -> tuple[control.LtiPlant, ...]:
    """The bundled example plants, in their stored order."""
    data = json.loads(
        resources.files("whft.data").joinpath("demo_plants.json").read_text()
    )
    return tuple(_parse_plant(obj, "demo_plants.json") for obj in data["plants"])


def generate_synthetic(
    n_control: int,
    n_other: int,
    target_utilization: float,
    period_pool: Sequence[int] = DEFAULT_PERIOD_POOL,
    wh_ranges: tuple[tuple[int, int], tuple[int, int]] = DEFAULT_WH_RANGES,
    seed: int = 0,
    n_cpus: int = 1,
    band: float = 0.05,
    max_tries: int = 500,
    tick_seconds: float = 0.001,
) -> System:
    """Random taskset with UUniFast utilizations.

    Control tasks cycle through the bundled demo plants; their periods
    are dictated by the plant sampling period and their weakly-hard
    constraints synthesized from stability, capped at the k range.
    Non-control tasks draw periods from the pool and (k, n) uniformly
    from `wh_ranges`.  Resamples until the rounded utilization sum lands
    within `band` of the target.
    """
    if not 0 < target_utilization <= n_cpus:
        raise ModelError(
            f"target utilization must be in (0, n_cpus], got {target_utilization}"
        )
    n = n_control + n_other
    if n == 0:
        raise ModelError("need at least one task")
    rng = random.Random(seed)
    plants = demo_plants()
    bound_plants = [plants[i % len(plants)] for i in range(n_control)]
    control_periods = [
        max(1, round(p.sampling_period / tick_seconds)) for p in bound_plants
    ]
    (k_lo, k_hi), (n_lo, n_hi) = wh_ranges

    for _ in range(max_tries):
        utils = uunifast(n, target_utilization, rng)
        periods = control_periods + [
            period_pool[rng.randrange(len(period_pool))] for _ in range(n_other)
        ]
        wcets = [max(1, round(u * t)) for u, t in zip(utils, periods)]
        if any(c > t for c, t in zip(wcets, periods)):
            continue
        if abs(sum(c / t for c, t in zip(wcets, periods)) - target_utilization) <= band:
            break
    else:
        raise ModelError(
            f"could not hit utilization {target_utilization} within +/-{band} "
            f"after {max_tries} draws"
        )

    tasks = []
    for i in range(n):
        is_control = i < n_control
        t = periods[i]
        c = wcets[i]
        if is_control:
            plant = bound_plants[i]
            dp = control.discretized(plant)
            win = rng.randint(n_lo, n_hi)
            k = control.synthesize_wh(dp, win, k_cap=k_hi)
            constraint = (
                WeaklyHardConstraint(min(k, win - 1), win)
                if k is not None
                else WeaklyHardConstraint(0, 1)
            )
            j_des = control.control_cost(dp, (False,))
            binding = ControlBinding(
                plant_id=plant.id, weight=1.0, j_des=float(max(1, j_des))
            )
        else:
            win = rng.randint(n_lo, n_hi)
            k = rng.randint(k_lo, k_hi)
            constraint = WeaklyHardConstraint(min(k, win - 1), win)
            binding = None
        tasks.append(
            Task(
                id=f"c{i}" if is_control else f"t{i}",
                period=t,
                deadline=t,
                wcet=c,
                comparison_overhead=0,
                eed_overhead=max(1, round(0.2 * c)),
                detection=DetectionChoice.NONE,
                constraints=(constraint,),
                control=binding,
            )
        )
    return System(
        tasks=tuple(tasks),
        platform=Platform(tuple(f"cpu{i}" for i in range(n_cpus))),
        fault_model=FaultModel(),
        plants={p.id: p for p in set(bound_plants)},
        tick_seconds=tick_seconds,
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _write_out(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _backend(args) -> str:
    return args.backend


def cmd_analyze(args) -> int:
    cfg = _scale_wcets(parse_config(args.model), args.scale)
    report = twca.twca_verdict(cfg)
    payload = {
        "schedulable": report.schedulable,
        "tasks": [
            {
                "id": rec.task_id,
                "converged": rec.converged,
                "busy_window": rec.busy_window,
                "k": rec.k_i,
                "wcrt": rec.wcrt,
                "miss_candidates": sorted(rec.miss_candidates),
                "dmm": {str(n): bound for n, bound in sorted(rec.dmm.items())},
                "schedulable": rec.schedulable,
            }
            for rec in report.tasks
        ],
    }
    _write_out(json.dumps(payload, indent=1) + "\n", args.out)
    return EXIT_OK if report.schedulable else EXIT_INFEASIBLE


def cmd_simulate(args) -> int:
    cfg = _scale_wcets(parse_config(args.model), args.scale)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ("cpu", "scenario", "task", "instance", "release", "deadline", "completion", "miss")
    )
    trace_rows: list[tuple] = []
    ok = True
    for cpu in cfg.system.platform.cpu_ids:
        for scenario in simkit.enumerate_scenarios(cfg, cpu):
            trace: Optional[list] = [] if args.trace else None
            outcome = simkit.simulate_scenario(cfg, cpu, scenario, trace=trace)
            ok = ok and outcome.schedulable
            label = "none" if scenario.is_none else f"{scenario.task_id}#{scenario.instance}"
            for task in cfg.system.tasks:
                if cfg.allocation[task.id] != cpu:
                    continue
                for j in range(cfg.system.hyperperiod // task.period):
                    release = j * task.period
                    done = outcome.completions[(task.id, j)]
                    writer.writerow(
                        (
                            cpu,
                            label,
                            task.id,
                            j,
                            release,
                            release + task.deadline,
                            done,
                            int(done > release + task.deadline),
                        )
                    )
            if trace:
                trace_rows.extend(
                    (cpu, label, job, event, t) for t, _, job, event in trace
                )
    _write_out(buf.getvalue(), args.out)
    if args.trace:
        tbuf = io.StringIO()
        twriter = csv.writer(tbuf, lineterminator="\n")
        twriter.writerow(("cpu", "scenario", "job", "event", "time"))
        twriter.writerows(trace_rows)
        _write_out(tbuf.getvalue(), args.out + ".trace.csv" if args.out else None)
    return EXIT_OK if ok else EXIT_INFEASIBLE


def cmd_optimize(args) -> int:
    cfg = _scale_wcets(parse_config(args.model), args.scale)
    params = explore.SaParams(
        t0=args.sa_t0, iter_max=args.sa_iters, seed=args.seed
    )
    best, obj = explore.sa_optimize(
        cfg.system, params, backend=_backend(args), threshold=args.threshold
    )
    payload = {
        "objective": {
            "system_cost": obj.system_cost,
            "penalized": obj.penalized,
            "coverage": obj.coverage,
            "schedulable": obj.schedulable,
            "stable": obj.stable,
            "feasible": obj.feasible,
        },
        "allocation": dict(sorted(best.allocation.items())),
        "priority": dict(sorted(best.priority.items())),
        "detection": {k: v.value for k, v in sorted(best.detection.items())},
    }
    _write_out(json.dumps(payload, indent=1) + "\n", args.out)
    if args.emit_model is not None:
        _write_out(emit_model(best), args.emit_model)
    return EXIT_OK if obj.feasible else EXIT_INFEASIBLE


def _sweep_cell(cell) -> dict:
    utilization, threshold, seed, backend, n_control, n_other = cell
    start = time.perf_counter()
    system = generate_synthetic(n_control, n_other, utilization, seed=seed)
    hard, weak = explore.coverage_frontier(system, backend=backend)
    runtime = time.perf_counter() - start
    return {
        "schema": SWEEP_SCHEMA,
        "utilization": f"{utilization:.6f}",
        "threshold": f"{threshold:.6f}",
        "seed": seed,
        "hard_coverage": f"{hard.coverage:.6f}",
        "coverage": f"{weak.coverage:.6f}",
        "system_cost": f"{weak.system_cost:.6f}",
        "feasible": int(weak.feasible and weak.coverage >= threshold - 1e-12),
        "runtime_s": f"{runtime:.6f}",
    }


def cmd_sweep(args) -> int:
    utilizations = [float(x) for x in args.utilizations.split(",") if x]
    thresholds = [float(x) for x in args.thresholds.split(",") if x]
    if not utilizations or not thresholds or args.seeds <= 0:
        raise ModelError("sweep needs non-empty utilizations, thresholds and seeds")
    cells = [
        (u, th, seed, _backend(args), args.n_control, args.n_other)
        for u in utilizations
        for th in thresholds
        for seed in range(args.seed, args.seed + args.seeds)
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(cell) for cell in cells]
    if args.fixed_runtime:
        for row in rows:
            row["runtime_s"] = "0.000000"
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    _write_out(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_generate(args) -> int:
    system = generate_synthetic(
        n_control=args.n_control,
        n_other=args.n_other,
        target_utilization=args.utilization,
        seed=args.seed,
        n_cpus=args.cpus,
    )
    cfg = explore.initial_solution(system, threshold=0.0)
    note = (
        f"generator-produced: n_control={args.n_control} n_other={args.n_other} "
        f"utilization={args.utilization} seed={args.seed}"
    )
    _write_out(emit_model(cfg, note=note), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    import numpy as np

    pure = _kernels.pyfallback
    compiled = None
    if _kernels.BACKEND == "compiled":
        from ._kernels import _core as compiled  # type: ignore

    lines = [f"active kernel backend: {_kernels.BACKEND}"]
    system = generate_synthetic(4, 4, 0.7, seed=1)
    cfg = explore.initial_solution(system, 0.0)
    cpu = system.platform.cpu_ids[0]
    tasks, periods, budgets, recoveries, prios, counts, offsets = simkit._cpu_arrays(
        cfg, cpu
    )
    scen_t, scen_i = [], []
    for sc in simkit.enumerate_scenarios(cfg, cpu):
        index = {t.id: k for k, t in enumerate(tasks)}
        scen_t.append(-1 if sc.is_none else index[sc.task_id])
        scen_i.append(-1 if sc.is_none else sc.instance)
    scen_t = np.array(scen_t, dtype=np.int64)
    scen_i = np.array(scen_i, dtype=np.int64)

    def time_it(fn, reps):
        best = math.inf
        result = None
        for _ in range(reps):
            t0 = time.perf_counter()
            result = fn()
            best = min(best, time.perf_counter() - t0)
        return best, result

    reps = args.reps
    t_pure, r_pure = time_it(
        lambda: pure.simulate_batch(
            periods, budgets, recoveries, prios, counts, offsets, scen_t, scen_i
        ),
        reps,
    )
    lines.append(
        f"simulate_batch [{len(scen_t)} scenarios x {int(counts.sum())} jobs]: "
        f"pure {t_pure * 1e3:.3f} ms"
    )
    if compiled is not None:
        t_c, r_c = time_it(
            lambda: compiled.simulate_batch(
                periods, budgets, recoveries, prios, counts, offsets, scen_t, scen_i
            ),
            reps,
        )
        agree = bool((np.asarray(r_c) == np.asarray(r_pure)).all())
        lines.append(
            f"simulate_batch: compiled {t_c * 1e3:.3f} ms "
            f"(speedup x{t_pure / t_c:.1f}, outputs {'agree' if agree else 'DIFFER'})"
        )

    plant = demo_plants()[2]
    dp = control.discretized(plant)
    misses = tuple(i % 5 == 0 for i in range(10))
    phis = control._phi_stack(dp, misses)
    t_pure, r_pure = time_it(
        lambda: pure.cost_scan(phis, dp.n, dp.j_th, dp.h_max), reps
    )
    lines.append(
        f"cost_scan [{len(misses)} steps, dim {dp.dim}]: pure {t_pure * 1e3:.3f} ms"
    )
    if compiled is not None:
        t_c, r_c = time_it(
            lambda: compiled.cost_scan(phis, dp.n, dp.j_th, dp.h_max), reps
        )
        agree = r_c == r_pure
        lines.append(
            f"cost_scan: compiled {t_c * 1e3:.3f} ms "
            f"(speedup x{t_pure / t_c:.1f}, outputs {'agree' if agree else 'DIFFER'})"
        )
    if compiled is None:
        lines.append("compiled kernels unavailable; pure backend only")
    _write_out("\n".join(lines) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_common(sp, model=True):
    if model:
        sp.add_argument("model", help="model JSON file")
        sp.add_argument(
            "--scale", type=float, default=1.0, help="WCET scale factor (default 1.0)"
        )
    sp.add_argument("--out", default=None, help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="whft",
        description="Fault-tolerance-aware weakly-hard scheduling toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("analyze", help="analytic miss-bound report")
    _add_common(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("simulate", help="exact per-scenario simulation CSV")
    _add_common(sp)
    sp.add_argument("--trace", action="store_true", help="also dump a scheduler trace CSV")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("optimize", help="simulated-annealing design search")
    _add_common(sp)
    sp.add_argument("--backend", choices=("twca", "sim"), default="twca")
    sp.add_argument("--threshold", type=float, default=0.0, help="coverage requirement")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--sa-iters", type=int, default=100, help="moves per temperature")
    sp.add_argument("--sa-t0", type=float, default=100.0, help="initial temperature")
    sp.add_argument(
        "--emit-model", default=None, help="also write the chosen config as a model file"
    )
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("sweep", help="utilization grid, one CSV row per cell")
    _add_common(sp, model=False)
    sp.add_argument("--utilizations", default="0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    sp.add_argument("--thresholds", default="0.0")
    sp.add_argument("--seeds", type=int, default=20, help="seeds per cell")
    sp.add_argument("--seed", type=int, default=0, help="first seed")
    sp.add_argument("--backend", choices=("twca", "sim"), default="sim")
    sp.add_argument("--n-control", type=int, default=4)
    sp.add_argument("--n-other", type=int, default=4)
    sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sp.add_argument(
        "--fixed-runtime",
        action="store_true",
        help="write runtime_s as 0 so repeated runs are byte-identical",
    )
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("generate", help="write a synthetic model file")
    _add_common(sp, model=False)
    sp.add_argument("--n-control", type=int, default=4)
    sp.add_argument("--n-other", type=int, default=4)
    sp.add_argument("--utilization", type=float, default=0.7)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--cpus", type=int, default=1)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("bench", help="compiled vs pure kernel timing")
    _add_common(sp, model=False)
    sp.add_argument("--reps", type=int, default=5)
    sp.set_defaults(func=cmd_bench)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
