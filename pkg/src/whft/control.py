"""Control behaviour of sampled LTI plants under deadline misses.

Plants are sampled with logical-execution-time (LET) semantics: the
input computed for period k becomes active D seconds into the period,
and the previous input is held until then.  When the control job misses
its deadline its output is discarded for that period and the last
applied input is simply held, so the closed loop evolves through a
product of per-period step matrices selected by the hit/miss pattern.

Stability asks every cyclic product of step matrices to be a strict
contraction in spectrum; the cost of a pattern is the number of periods
until the state-block transition norm stays below a threshold.  The
worst admissible pattern under a weakly-hard constraint is found by
exhaustive enumeration over one window, which also yields the largest
constraint a plant can tolerate.
"""

from __future__ import annotations

import functools
import itertools
import weakref
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import expm

from . import _kernels
from ._kernels import pyfallback
from .model import MissPattern, ModelError, WeaklyHardConstraint

STABILITY_MARGIN = 1e-9
ENUMERATION_GUARD = 24
DEFAULT_HORIZON = 200


class _Unstable:
    """Singleton returned where a pattern admits no finite settling cost."""

    def __repr__(self) -> str:  # pragma: no cover
        return "UNSTABLE"


UNSTABLE = _Unstable()

CostResult = Union[int, _Unstable]
Pattern = Union[MissPattern, Sequence[bool]]


def _as_matrix(rows, name: str) -> tuple[tuple[float, ...], ...]:
    out = tuple(tuple(float(x) for x in row) for row in rows)
    if not out or not out[0]:
        raise ModelError(f"{name} must have positive dimensions")
    width = len(out[0])
    if any(len(row) != width for row in out):
        raise ModelError(f"{name} rows have inconsistent lengths")
    if not all(np.isfinite(x) for row in out for x in row):
        raise ModelError(f"{name} has non-finite entries")
    return out


@dataclass(frozen=True)
class LtiPlant:
    """Continuous-time plant with its sampled-feedback configuration.

    `gain` acts on the augmented state [x; u_prev] (dimensions m x (n+m));
    pole placement is out of scope, gains arrive with the model.
    """

    id: str
    a: tuple[tuple[float, ...], ...]
    b: tuple[tuple[float, ...], ...]
    c_out: tuple[tuple[float, ...], ...]
    sampling_period: float
    let_deadline: float
    gain: tuple[tuple[float, ...], ...]
    cost_threshold: float = 0.01
    horizon_cap: int = DEFAULT_HORIZON

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", _as_matrix(self.a, "A"))
        object.__setattr__(self, "b", _as_matrix(self.b, "B"))
        object.__setattr__(self, "c_out", _as_matrix(self.c_out, "C"))
        object.__setattr__(self, "gain", _as_matrix(self.gain, "K"))
        n = len(self.a)
        m = len(self.b[0])
        if any(len(row) != n for row in self.a):
            raise ModelError(f"plant {self.id}: A must be square")
        if len(self.b) != n:
            raise ModelError(f"plant {self.id}: B must have {n} rows")
        if len(self.c_out[0]) != n:
            raise ModelError(f"plant {self.id}: C must have {n} columns")
        if len(self.gain) != m or len(self.gain[0]) != n + m:
            raise ModelError(
                f"plant {self.id}: gain must be {m}x{n + m} for the augmented state"
            )
        if self.sampling_period <= 0:
            raise ModelError(f"plant {self.id}: sampling period must be positive")
        if not 0 <= self.let_deadline <= self.sampling_period:
            raise ModelError(
                f"plant {self.id}: LET deadline must lie within [0, h]"
            )
        if not 0 < self.cost_threshold <= 1:
            raise ModelError(f"plant {self.id}: cost threshold must be in (0, 1]")
        if self.horizon_cap < 1:
            raise ModelError(f"plant {self.id}: horizon cap must be positive")

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def m(self) -> int:
        return len(self.b[0])


@dataclass(frozen=True, eq=False)
class DiscretePlant:
    """Period-sampled plant: x[k+1] = A_d x + B_d0 u[k] + B_d1 u[k-1]."""

    a_d: np.ndarray
    b_d0: np.ndarray
    b_d1: np.ndarray
    gain: np.ndarray
    j_th: float
    h_max: int
    psi_max: int = 1
    source: Optional[LtiPlant] = None

    def __post_init__(self) -> None:
        if self.psi_max < 1:
            raise ModelError("psi_max must be >= 1")

    @property
    def n(self) -> int:
        return self.a_d.shape[0]

    @property
    def m(self) -> int:
        return self.b_d0.shape[1]

    @property
    def dim(self) -> int:
        return self.n + self.m * self.psi_max


def _input_integral(a: np.ndarray, b: np.ndarray, tau: float) -> np.ndarray:
    """integral_0^tau e^{As} B ds via the augmented-block exponential."""
    n, m = b.shape
    block = np.zeros((n + m, n + m))
    block[:n, :n] = a
    block[:n, n:] = b
    return expm(block * tau)[:n, n:]


def discretize(plant: LtiPlant, psi_max: int = 1) -> DiscretePlant:
    """Sample the plant over one period with the LET input split.

    The input active before the deadline D is the previous one, so its
    share of the convolution integral is the tail [h-D, h]; the fresh
    input gets [0, h-D].  Both integrals come from the augmented-block
    matrix exponential (scaling-and-squaring), never from inverting A.
    """
    a = np.array(plant.a, dtype=np.float64)
    b = np.array(plant.b, dtype=np.float64)
    h = plant.sampling_period
    d = plant.let_deadline
    a_d = expm(a * h)
    g_full = _input_integral(a, b, h)
    b_d0 = _input_integral(a, b, h - d)
    b_d1 = g_full - b_d0
    for name, mat in (("A_d", a_d), ("B_d0", b_d0), ("B_d1", b_d1)):
        if not np.all(np.isfinite(mat)):
            raise ModelError(f"plant {plant.id}: {name} is non-finite; ill-conditioned")
    return DiscretePlant(
        a_d=a_d, b_d0=b_d0, b_d1=b_d1,
        gain=np.array(plant.gain, dtype=np.float64),
        j_th=plant.cost_threshold, h_max=plant.horizon_cap,
        psi_max=psi_max, source=plant,
    )


@functools.lru_cache(maxsize=256)
def discretized(plant: LtiPlant) -> DiscretePlant:
    """Cached single-slot discretization (costs are tail-insensitive)."""
    return discretize(plant, psi_max=1)


def step_matrix(dp: DiscretePlant, hit: bool, psi: int = 1) -> np.ndarray:
    """One-period linear map on the augmented state [x; v1; ...; v_psi_max].

    v1 holds the freshest applied input; on a miss the held input drives
    the whole period and re-enters the history, so v1 always equals
    u[k-psi] for whatever staleness psi the pattern has produced.  The
    map itself is therefore the same for every admissible psi; the
    argument is validated against psi_max and kept for the staleness
    bookkeeping of callers.
    """
    if not 1 <= psi <= dp.psi_max:
        raise ModelError(f"psi {psi} outside [1, {dp.psi_max}]")
    n, m, dim = dp.n, dp.m, dp.dim
    phi = np.zeros((dim, dim))
    if hit:
        k_ext = np.zeros((m, dim))
        k_ext[:, : n + m] = dp.gain
        phi[:n, :n] = dp.a_d
        phi[:n, n : n + m] += dp.b_d1
        phi[:n, :] -= dp.b_d0 @ k_ext
        phi[n : n + m, :] = -k_ext
    else:
        phi[:n, :n] = dp.a_d
        phi[:n, n : n + m] = dp.b_d0 + dp.b_d1
        phi[n : n + m, n : n + m] = np.eye(m)
    # older history slots shift down regardless of hit/miss
    for j in range(1, dp.psi_max):
        lo = n + j * m
        phi[lo : lo + m, lo - m : lo] = np.eye(m)
    return phi


def _misses(pattern: Pattern) -> tuple[bool, ...]:
    if isinstance(pattern, MissPattern):
        return pattern.misses
    out = tuple(bool(x) for x in pattern)
    if not out:
        raise ModelError("pattern must be non-empty")
    return out


_phi_cache: "weakref.WeakKeyDictionary[DiscretePlant, tuple]" = (
    weakref.WeakKeyDictionary()
)


def _phi_pair(dp: DiscretePlant) -> tuple[np.ndarray, np.ndarray]:
    pair = _phi_cache.get(dp)
    if pair is None:
        pair = (step_matrix(dp, True), step_matrix(dp, False))
        _phi_cache[dp] = pair
    return pair


def _phi_stack(dp: DiscretePlant, misses: tuple[bool, ...]) -> np.ndarray:
    hit, miss = _phi_pair(dp)
    return np.stack([miss if m else hit for m in misses])


def staleness(misses: tuple[bool, ...], index: int, psi_max: int) -> int:
    """1 + consecutive misses immediately before `index`, cyclic, capped."""
    n = len(misses)
    run = 0
    for back in range(1, n + 1):
        if misses[(index - back) % n]:
            run += 1
        else:
            break
    return min(1 + run, psi_max)


def pattern_transition(dp: DiscretePlant, pattern: Pattern, start: int = 0) -> np.ndarray:
    """Transition over one full pattern length beginning at `start` (cyclic)."""
    misses = _misses(pattern)
    n = len(misses)
    hit, miss = _phi_pair(dp)
    phi = np.eye(dp.dim)
    for step in range(n):
        idx = (start + step) % n
        phi = (miss if misses[idx] else hit) @ phi
    return phi


def spectral_radius(mat: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(mat))))


def power_iteration_radius(mat: np.ndarray, iters: int = 2000) -> float:
    """Independent spectral-radius estimate used to validate the eigensolver.

    Power iteration on the matrix applied to a fixed dense start vector;
    converges to the dominant eigenvalue magnitude for generic inputs.
    """
    n = mat.shape[0]
    v = np.ones(n) / np.sqrt(n)
    v += np.arange(n) * 1e-3  # break symmetry deterministically
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = mat @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        lam = norm
        v = w / norm
    return float(lam)


def is_stable(dp: DiscretePlant, pattern: Pattern) -> bool:
    """Strict spectral contraction of the cyclic pattern product.

    Cyclic rotations of a matrix product share their non-zero spectrum
    (AB and BA always do), so one rotation's radius decides for all
    start indices.
    """
    misses = _misses(pattern)
    return spectral_radius(pattern_transition(dp, misses)) < 1.0 - STABILITY_MARGIN


_cost_cache: "weakref.WeakKeyDictionary[DiscretePlant, dict]" = (
    weakref.WeakKeyDictionary()
)


def control_cost(dp: DiscretePlant, pattern: Pattern) -> CostResult:
    """Settling horizon of the pattern: max over cyclic starts k of the
    smallest h with ||state block of Phi_{k+r,k}||_2 <= j_th for every
    r in [h, h_max]; UNSTABLE when some start never settles."""
    misses = _misses(pattern)
    per_plant = _cost_cache.setdefault(dp, {})
    hit = per_plant.get(misses)
    if hit is not None:
        return hit
    phis = _phi_stack(dp, misses)
    if dp.dim <= 16 and dp.n <= 8:
        cost, unstable = _kernels.cost_scan(phis, dp.n, dp.j_th, dp.h_max)
    else:
        cost, unstable = pyfallback.cost_scan(phis, dp.n, dp.j_th, dp.h_max)
    result: CostResult = UNSTABLE if unstable else int(cost)
    per_plant[misses] = result
    return result


def cost_order_key(cost: CostResult) -> float:
    """Sortable value: UNSTABLE above every finite cost."""
    return float("inf") if cost is UNSTABLE else float(cost)


def _canonical_rotation(misses: tuple[bool, ...]) -> tuple[bool, ...]:
    n = len(misses)
    return min(tuple(misses[(i + s) % n] for i in range(n)) for s in range(n))


def _patterns_with_misses(n: int, k: int):
    """Canonical representatives of length-n cyclic patterns with exactly
    k misses (cost and stability are rotation-invariant)."""
    seen = set()
    for positions in itertools.combinations(range(n), k):
        misses = tuple(i in positions for i in range(n))
        canon = _canonical_rotation(misses)
        if canon not in seen:
            seen.add(canon)
            yield canon


_worst_cache: "weakref.WeakKeyDictionary[DiscretePlant, dict]" = (
    weakref.WeakKeyDictionary()
)


def worst_cost_over(dp: DiscretePlant, k: int, n: int) -> CostResult:
    """Worst cost over every length-n cyclic pattern with at most k misses.

    Unlike a weakly-hard constraint, k may equal n: a saturated miss
    budget admits the all-miss pattern.  Exhaustive over one window; 2^n
    blow-up is fenced by an enumeration guard.  UNSTABLE as soon as any
    admissible pattern is unstable.
    """
    if n > ENUMERATION_GUARD:
        raise ModelError(f"window {n} exceeds enumeration guard {ENUMERATION_GUARD}")
    if not 0 <= k <= n:
        raise ModelError(f"miss budget {k} outside [0, {n}]")
    per_plant = _worst_cache.setdefault(dp, {})
    key = (k, n)
    hit = per_plant.get(key)
    if hit is not None:
        return hit
    if k > 0:
        # Probe the burst pattern (k consecutive misses) before paying
        # for the full enumeration: it is the usual destabilizer, and a
        # single unstable admissible pattern already decides the result.
        # A saturated budget (k = n) probes all-miss, which input-hold
        # dynamics never survive.
        if control_cost(dp, (True,) * k + (False,) * (n - k)) is UNSTABLE:
            per_plant[key] = UNSTABLE
            return UNSTABLE
    worst: CostResult = 0
    for j in range(k + 1):
        for misses in _patterns_with_misses(n, j):
            cost = control_cost(dp, misses)
            if cost is UNSTABLE:
                per_plant[key] = UNSTABLE
                return UNSTABLE
            if cost > worst:
                worst = cost
    per_plant[key] = worst
    return worst


def approx_worst_cost(dp: DiscretePlant, constraint: WeaklyHardConstraint) -> CostResult:
    """Worst cost over the patterns a weakly-hard constraint admits."""
    return worst_cost_over(dp, constraint.k, constraint.n)


_synth_cache: "weakref.WeakKeyDictionary[DiscretePlant, dict]" = (
    weakref.WeakKeyDictionary()
)


def synthesize_wh(dp: DiscretePlant, n: int, k_cap: Optional[int] = None) -> Optional[int]:
    """Largest k such that every length-n cyclic pattern with at most k
    misses is stable; None when even the all-hit pattern (k=0) is not.

    Searching k upward only ever tests patterns with exactly k misses,
    so the usual call sites (small feasible k) stay cheap.  `k_cap`
    truncates the search; the returned value is then min(true k, k_cap).
    """
    if n > ENUMERATION_GUARD:
        raise ModelError(f"window {n} exceeds enumeration guard {ENUMERATION_GUARD}")
    top = n if k_cap is None else min(n, k_cap)
    per_plant = _synth_cache.setdefault(dp, {})
    if (n, top) in per_plant:
        return per_plant[(n, top)]
    result: Optional[int] = top
    for k in range(top + 1):
        stop = False
        for misses in _patterns_with_misses(n, k):
            if not is_stable(dp, misses):
                result = k - 1 if k > 0 else None
                stop = True
                break
        if stop:
            break
    per_plant[(n, top)] = result
    return result
