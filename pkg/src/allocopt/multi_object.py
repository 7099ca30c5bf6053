"""Two data objects sharing one memory profile.

The higher-demand object is placed first with the single-object solver; the
second object is then placed on whatever memory is left.  Recovery of the two
objects is scored independently (one access draw per object), which is what
makes the weighted objective additive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, EnumerationSizeError, InfeasibleError, SecondObjectInfeasibleError
from .exact_core import BUDGET_TOL, Allocation, SystemParams, _check_prob, exact_success, snap_ceil
from .memory_limited import MemoryProfile, flmin_alloc, solve_arbitrary_profile
from .oracle import SCORE_TIE_TOL, compositions_colex
from .q_relaxation import _require_nondegenerate, q_function

DEMAND_SUM_TOL = 1e-12
MAX_TWO_OBJECT_NODES = 6
MAX_TWO_OBJECT_GRANULARITY = 8
STRATEGIES = ("object-1-first", "object-2-first", "mixed")


@dataclass(frozen=True)
class TwoObjectSpec:
    budget_1: float
    budget_2: float
    demand_prob_1: float
    access_prob: float

    def __post_init__(self):
        for name in ("budget_1", "budget_2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive and finite, got {v}")
        _check_prob(self.demand_prob_1, "demand_prob_1")
        _check_prob(self.access_prob, "access_prob")

    @property
    def demand_prob_2(self) -> float:
        return 1.0 - self.demand_prob_1

    @property
    def budgets(self) -> tuple:
        return (self.budget_1, self.budget_2)

    @property
    def demands(self) -> tuple:
        return (self.demand_prob_1, self.demand_prob_2)

    def swapped(self) -> "TwoObjectSpec":
        return TwoObjectSpec(self.budget_2, self.budget_1, self.demand_prob_2, self.access_prob)


def _check_params(spec: TwoObjectSpec, profile: MemoryProfile, params: Optional[SystemParams]) -> None:
    if params is None:
        return
    if params.num_nodes != profile.N:
        raise DomainError(f"params say {params.num_nodes} nodes, profile has {profile.N}")
    if abs(params.access_prob - spec.access_prob) > DEMAND_SUM_TOL:
        raise DomainError("params.access_prob disagrees with spec.access_prob")


def _q_term(n: int, T: float, p: float) -> float:
    mu = n * p
    sigma = math.sqrt(n * p * (1.0 - p))
    return q_function((snap_ceil(n / T) - mu) / sigma)


def p4_objective(n1: int, n2: int, spec: TwoObjectSpec) -> float:
    """Demand-weighted sum of the two relaxed (Q-function) recovery probabilities."""
    if n1 < 1 or n2 < 1:
        raise DomainError("supports must be >= 1")
    p = spec.access_prob
    _require_nondegenerate(p)
    return (spec.demand_prob_1 * _q_term(n1, spec.budget_1, p)
            + spec.demand_prob_2 * _q_term(n2, spec.budget_2, p))


def two_object_score(x1, x2, spec: TwoObjectSpec) -> float:
    p = spec.access_prob
    return spec.demand_prob_1 * exact_success(x1, p) + spec.demand_prob_2 * exact_success(x2, p)


def place_single(T: float, p: float, caps: np.ndarray) -> Allocation:
    """Place one object on ``caps`` (zero entries allowed); returns a full-length allocation.

    Budgets below one object unit can never be recovered, so they are parked
    with a full-load placement instead of going through the solver.
    """
    caps = np.clip(np.asarray(caps, dtype=float), 0.0, None)
    if T > math.fsum(caps) + BUDGET_TOL:
        raise InfeasibleError(f"budget {T} exceeds available memory {math.fsum(caps):.12g}")
    keep = np.flatnonzero(caps > BUDGET_TOL)
    sub = MemoryProfile.from_caps(caps[keep])
    if T < 1.0:
        placed = flmin_alloc(sub, T)
    else:
        placed = solve_arbitrary_profile(SystemParams(sub.N, p, T), sub).allocation
    x = np.zeros(caps.size)
    x[keep] = placed.amounts
    return Allocation(tuple(float(v) for v in x))


def _sequential(spec: TwoObjectSpec, caps: np.ndarray, first: int) -> tuple:
    second = 1 - first
    T = spec.budgets
    p = spec.access_prob
    xa = place_single(T[first], p, caps)
    residual = caps - xa.as_array()
    try:
        xb = place_single(T[second], p, residual)
    except InfeasibleError as exc:
        raise SecondObjectInfeasibleError(
            f"object {second + 1} does not fit in the residual memory: {exc}"
        ) from exc
    return (xa, xb) if first == 0 else (xb, xa)


def _mixed(spec: TwoObjectSpec, caps: np.ndarray) -> tuple:
    share = spec.budget_1 / (spec.budget_1 + spec.budget_2)
    p = spec.access_prob
    return (place_single(spec.budget_1, p, caps * share),
            place_single(spec.budget_2, p, caps * (1.0 - share)))


def _check_total(spec: TwoObjectSpec, profile: MemoryProfile) -> None:
    if spec.budget_1 + spec.budget_2 > profile.total + BUDGET_TOL:
        raise InfeasibleError(
            f"T1 + T2 = {spec.budget_1 + spec.budget_2:.12g} exceeds total memory {profile.total:.12g}"
        )


def allocate_two_objects(spec: TwoObjectSpec, profile: MemoryProfile,
                         params: Optional[SystemParams] = None) -> tuple:
    """Priority-first placement; returns ``(X1, X2)`` in original node order.

    Equal demand places object 1 first.
    """
    _check_params(spec, profile, params)
    _check_total(spec, profile)
    caps = np.asarray(profile.original_caps(), dtype=float)
    first = 0 if spec.demand_prob_1 >= spec.demand_prob_2 else 1
    return _sequential(spec, caps, first)


@dataclass
class TwoObjectReport:
    greedy_score: float
    oracle_score: float
    gap: float
    strategy_scores: list
    grid_best_score: float
    grid_best: tuple
    greedy: tuple
    evaluated_pairs: int
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "greedy_score": self.greedy_score,
            "oracle_score": self.oracle_score,
            "gap": self.gap,
            "strategy_scores": list(self.strategy_scores),
            "strategies": list(STRATEGIES),
            "grid_best_score": self.grid_best_score,
            "grid_best": [list(x.amounts) for x in self.grid_best] if self.grid_best else None,
            "greedy": [list(x.amounts) for x in self.greedy],
            "evaluated_pairs": self.evaluated_pairs,
            "notes": list(self.notes),
        }


def _grid_side(T: float, g: int, N: int, caps: np.ndarray, p: float):
    comps = np.array(list(compositions_colex(g, N)), dtype=float) * (T / g)
    comps = comps[np.all(comps <= caps + BUDGET_TOL, axis=1)]
    scores = np.array([exact_success(tuple(row), p) for row in comps])
    return comps, scores


def exhaustive_two_object(spec: TwoObjectSpec, profile: MemoryProfile, granularity: int,
                          params: Optional[SystemParams] = None) -> TwoObjectReport:
    """Grid search over jointly feasible pairs, compared with the greedy placement.

    The oracle score is the best of the grid, the greedy pair and the three
    strategy orders, so it never falls below the greedy score.
    """
    N, g = profile.N, granularity
    if N > MAX_TWO_OBJECT_NODES or not 1 <= g <= MAX_TWO_OBJECT_GRANULARITY:
        raise EnumerationSizeError(
            f"two-object search limited to N <= {MAX_TWO_OBJECT_NODES}, "
            f"1 <= g <= {MAX_TWO_OBJECT_GRANULARITY}"
        )
    _check_params(spec, profile, params)
    _check_total(spec, profile)
    caps = np.asarray(profile.original_caps(), dtype=float)
    p, (w1, w2) = spec.access_prob, spec.demands
    notes = []

    greedy = allocate_two_objects(spec, profile)
    greedy_score = two_object_score(*greedy, spec)

    strategy_scores = []
    for build in (lambda: _sequential(spec, caps, 0), lambda: _sequential(spec, caps, 1),
                  lambda: _mixed(spec, caps)):
        try:
            strategy_scores.append(two_object_score(*build(), spec))
        except InfeasibleError as exc:
            strategy_scores.append(None)
            notes.append(str(exc))

    a1, s1 = _grid_side(spec.budget_1, g, N, caps, p)
    a2, s2 = _grid_side(spec.budget_2, g, N, caps, p)
    best, best_pair, evaluated = -math.inf, None, 0
    for i in range(a1.shape[0]):
        ok = np.flatnonzero(np.all(a1[i] + a2 <= caps + BUDGET_TOL, axis=1))
        if ok.size == 0:
            continue
        evaluated += ok.size
        vals = w1 * s1[i] + w2 * s2[ok]
        j = int(np.argmax(vals))
        if vals[j] > best + SCORE_TIE_TOL:
            best, best_pair = float(vals[j]), (i, int(ok[j]))
    if best_pair is None:
        notes.append("no jointly feasible grid pair")
        grid_best, grid_best_score = (), -math.inf
    else:
        grid_best = (Allocation(tuple(a1[best_pair[0]])), Allocation(tuple(a2[best_pair[1]])))
        grid_best_score = best

    candidates = [greedy_score, grid_best_score] + [s for s in strategy_scores if s is not None]
    oracle = max(candidates)
    return TwoObjectReport(
        greedy_score=greedy_score,
        oracle_score=oracle,
        gap=max(0.0, oracle - greedy_score),
        strategy_scores=strategy_scores,
        grid_best_score=grid_best_score if math.isfinite(grid_best_score) else None,
        grid_best=grid_best,
        greedy=greedy,
        evaluated_pairs=evaluated,
        notes=notes,
    )
