"""Gaussian (Q-function) relaxation of the symmetric allocation problem.

P1 maximises the exact binomial tail ``P[B(n, p) >= ceil(n/T)]`` over the
support size ``n``; P2 replaces the tail by ``Q((ceil(n/T) - np) / sqrt(np(1-p)))``
and admits a closed-form case analysis.  This module provides both solvers,
the curves behind the objective plot, and the P1/P2 agreement scan.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import DegenerateParameterError, InfeasibleError
from .exact_core import (
    Allocation,
    SystemParams,
    binom_log_lower_array,
    snap,
    snap_ceil,
    snap_floor,
    symmetric_log_failure,
    symmetric_success,
)

PT_EQ_TOL = 1e-9
P2_TIE_TOL = 1e-12
FAMILIES = ("symmetric", "quasi-symmetric", "flmin", "anmax", "explicit")
CASE_LABELS = ("Case1", "Case2", "Case3", "Case4", "Case5", "Case1a", "Case1b", "TieSet", "Infeasible")

NStar = Union[int, tuple]


@dataclass(frozen=True)
class CandidateSet:
    L: int
    values: tuple


@dataclass(frozen=True)
class SolveOutcome:
    case_label: str
    n_star: NStar
    allocation: Allocation
    success_prob: float
    family: str
    success_method: str = "closed-form"
    notes: tuple = ()

    @property
    def tie_set(self) -> tuple:
        return self.n_star if isinstance(self.n_star, tuple) else (self.n_star,)


@dataclass
class DisparityReport:
    alpha: float
    beta: float
    grid_points_total: int
    grid_points_pT_gt_1: int
    mismatches: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "grid_points_total": self.grid_points_total,
            "grid_points_pT_gt_1": self.grid_points_pT_gt_1,
            "mismatches": [list(m) for m in self.mismatches],
        }


def q_function(x: float) -> float:
    """Standard normal upper tail, ``0.5 * erfc(x / sqrt(2))``."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def pt_relation(p: float, T: float) -> int:
    """-1, 0 or +1 as ``pT`` is below, at (within ``PT_EQ_TOL``), or above one."""
    pt = p * T
    if abs(pt - 1.0) <= PT_EQ_TOL:
        return 0
    return -1 if pt < 1.0 else 1


def _require_budget(T: float) -> None:
    if T < 1.0 - 1e-12:
        raise InfeasibleError(f"budget T={T} < 1 can never recover a unit object")


def _require_nondegenerate(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise DegenerateParameterError(f"relaxation needs 0 < p < 1, got p={p}")


def relaxed_objective(n: float, params: SystemParams) -> float:
    """``Q((ceil(n/T) - mu) / sigma)`` with ``mu = np`` and ``sigma = sqrt(np(1-p))``."""
    p, T = params.access_prob, params.budget
    _require_nondegenerate(p)
    mu = n * p
    sigma = math.sqrt(n * p * (1.0 - p))
    return q_function((snap_ceil(n / T) - mu) / sigma)


def candidate_set(params: SystemParams) -> CandidateSet:
    """``{floor(T), floor(2T), ..., floor(LT), N}`` with ``L = floor(N/T)``."""
    N, T = params.num_nodes, params.budget
    _require_budget(T)
    L = snap_floor(N / T)
    values = {snap_floor(i * T) for i in range(1, L + 1)}
    values.add(N)
    return CandidateSet(L=L, values=tuple(sorted(v for v in values if 1 <= v <= N)))


def case4_upper(N: int, T: float, L: int) -> float:
    """Upper edge of the all-node regime; ``inf`` when the expression degenerates."""
    r = math.sqrt(L * T)
    d1 = N - r
    d2 = N * r - math.sqrt(T)
    if d1 <= 0 or d2 <= 0:
        return math.inf
    return (L + 1) / d1 + 1.0 / d2


def classify_p2(N: int, p: float, T: float) -> tuple[str, NStar]:
    """Case label and optimal support of the relaxed problem."""
    L = snap_floor(N / T)
    rel = pt_relation(p, T)
    if rel < 0:
        return "Case1", min(snap_floor(T), N)
    if rel == 0:
        tie = tuple(sorted({snap_floor(i * T) for i in range(1, L + 1)} & set(range(1, N + 1))))
        return "Case2", tie or (N,)
    top = snap_floor(L * T) if L >= 1 else N
    if p < (L + 1) / N:
        return "Case3", top
    if p <= case4_upper(N, T, L):
        return "Case4", N
    return "Case5", top


def _symmetric_outcome(label: str, n_star: NStar, params: SystemParams) -> SolveOutcome:
    rep = n_star[0] if isinstance(n_star, tuple) else n_star
    return SolveOutcome(
        case_label=label,
        n_star=n_star,
        allocation=Allocation.symmetric(params.num_nodes, rep, params.budget),
        success_prob=symmetric_success(rep, params),
        family="symmetric",
    )


def solve_p2(params: SystemParams) -> SolveOutcome:
    """Closed-form solution of the relaxed problem.

    pT < 1 picks ``floor(T)``; pT = 1 (within ``PT_EQ_TOL``) returns the
    tie set ``{floor(iT)}``; pT > 1 picks ``floor(LT)`` or ``N`` depending on
    where ``p`` falls relative to ``(L+1)/N`` and the all-node upper edge.
    """
    _require_budget(params.budget)
    _require_nondegenerate(params.access_prob)
    label, n_star = classify_p2(params.num_nodes, params.access_prob, params.budget)
    return _symmetric_outcome(label, n_star, params)


def argmin_first(values) -> int:
    """Index of the first minimum (smallest-n tie-break for ascending ``n``)."""
    best, best_i = math.inf, 0
    for i, v in enumerate(values):
        if v < best:
            best, best_i = v, i
    return best_i


def _support_range(params: SystemParams, search: str) -> tuple:
    if search == "candidate-set":
        return candidate_set(params).values
    if search == "full-range":
        return tuple(range(1, params.num_nodes + 1))
    raise ValueError(f"unknown search mode {search!r}")


def solve_p1(params: SystemParams, search: str = "candidate-set") -> SolveOutcome:
    """Exact symmetric optimum over the candidate set or over ``1..N``.

    Supports are ranked by their log failure probability, which keeps the
    ordering exact where success probabilities round to 1.0.
    """
    _require_budget(params.budget)
    ns = _support_range(params, search)
    i = argmin_first([symmetric_log_failure(n, params) for n in ns])
    return _symmetric_outcome("P1", ns[i], params)


def relaxed_argument(n: float, params: SystemParams) -> float:
    """Argument of Q in the relaxed objective; the objective is decreasing in it."""
    p, T = params.access_prob, params.budget
    _require_nondegenerate(p)
    return (snap_ceil(n / T) - n * p) / math.sqrt(n * p * (1.0 - p))


def argmax_p2(params: SystemParams, search: str = "candidate-set") -> tuple:
    """Maximisers of the relaxed objective, found by direct evaluation.

    Returns every support whose Q argument is within ``P2_TIE_TOL`` of the
    minimum, ascending.  Unlike :func:`solve_p2` this does not rely on the
    closed-form case boundaries.
    """
    _require_budget(params.budget)
    ns = _support_range(params, search)
    xs = [relaxed_argument(n, params) for n in ns]
    lo = min(xs)
    return tuple(n for n, x in zip(ns, xs) if x <= lo + P2_TIE_TOL * max(1.0, abs(lo)))


def objective_curve(params: SystemParams) -> list[tuple[int, float, float]]:
    """``(n, exact objective, relaxed objective)`` for ``n = 1..N``."""
    _require_budget(params.budget)
    return [
        (n, symmetric_success(n, params), relaxed_objective(n, params))
        for n in range(1, params.num_nodes + 1)
    ]


def curve_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "p1_objective", "p2_objective"])
    for n, a, b in rows:
        w.writerow([n, f"{a:.12g}", f"{b:.12g}"])
    return buf.getvalue()


# -- agreement scan -------------------------------------------------------------


def p1_argmax_over_p(N: int, T: float, ps: np.ndarray) -> np.ndarray:
    """Exact P1 argmax for every ``p`` in ``ps`` at fixed ``(N, T)``."""
    ns = candidate_set(SystemParams(N, 0.5, T)).values
    fail = np.array([binom_log_lower_array(n, ps, snap_ceil(n / T)) for n in ns])
    return np.asarray(ns)[np.argmin(fail, axis=0)]


def _p2_agreement_argmax(N: int, T: float, ps: np.ndarray, n1: np.ndarray) -> np.ndarray:
    """True where ``n1`` maximises the relaxed objective (ties included)."""
    ns = np.asarray(candidate_set(SystemParams(N, 0.5, T)).values)
    ks = np.array([snap_ceil(n / T) for n in ns], dtype=float)[:, None]
    nn = ns[:, None].astype(float)
    x = (ks - nn * ps) / np.sqrt(nn * ps * (1.0 - ps))
    lo = x.min(axis=0)
    row = np.searchsorted(ns, n1)
    return x[row, np.arange(len(ps))] <= lo + P2_TIE_TOL * np.maximum(1.0, np.abs(lo))


def _thread_count() -> int:
    env = os.environ.get("ALLOCOPT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _grid(step: float, lo: float, hi: float) -> np.ndarray:
    k0 = math.ceil(snap(lo / step))
    k1 = math.floor(snap(hi / step))
    return np.arange(k0, k1 + 1) * step


def scan_grid(N: int, p_step: float, t_step: float) -> tuple[np.ndarray, np.ndarray]:
    """``p`` in ``p_step .. 1 - p_step`` and ``T`` in ``max(1, t_step) .. N``."""
    if p_step <= 0 or t_step <= 0:
        raise ValueError("grid steps must be positive")
    ps = _grid(p_step, p_step, 1.0 - p_step)
    ps = ps[(ps > 0) & (ps < 1)]
    Ts = _grid(t_step, max(1.0, t_step), N)
    return ps, Ts[Ts >= 1.0 - 1e-12]


def disparity_scan(
    N: int,
    p_step: float = 1e-3,
    t_step: float = 0.1,
    p2: str = "argmax",
    p1_solver: Optional[Callable] = None,
    p2_solver: Optional[Callable] = None,
) -> DisparityReport:
    """Fraction of ``(p, T)`` grid points where P1 and P2 pick the same support.

    A point agrees when the P1 argmax lies in P2's solution set.  With
    ``p2="argmax"`` that set is the maximiser set of the relaxed objective
    (see :func:`argmax_p2`); ``p2="theorem"`` uses the closed-form cases of
    :func:`solve_p2` instead.  ``p1_solver(N, T, ps) -> array`` and
    ``p2_solver(N, p, T) -> n or tuple`` override either side.
    """
    ps, Ts = scan_grid(N, p_step, t_step)
    p1 = p1_solver or p1_argmax_over_p
    if p2_solver is None and p2 == "theorem":
        p2_solver = lambda n, p, t: classify_p2(n, p, t)[1]  # noqa: E731
    elif p2_solver is None and p2 != "argmax":
        raise ValueError(f"unknown p2 mode {p2!r}")

    def column(T: float):
        n1 = np.asarray(p1(N, T, ps))
        if p2_solver is None:
            ok = _p2_agreement_argmax(N, T, ps, n1)
        else:
            ok = np.empty(len(ps), dtype=bool)
            for j, (p, a) in enumerate(zip(ps, n1)):
                b = p2_solver(N, float(p), float(T))
                ok[j] = int(a) in (b if isinstance(b, tuple) else (b,))
        hi = np.array([pt_relation(float(p), float(T)) > 0 for p in ps])
        bad = [(round(float(ps[j]), 12), round(float(T), 12), int(n1[j]))
               for j in np.flatnonzero(~ok)]
        return int(ok.sum()), int((ok & hi).sum()), int(hi.sum()), bad

    workers = _thread_count()
    if workers > 1 and len(Ts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cols = list(pool.map(column, Ts))
    else:
        cols = [column(T) for T in Ts]

    total = len(ps) * len(Ts)
    agree = sum(c[0] for c in cols)
    agree_hi = sum(c[1] for c in cols)
    n_hi = sum(c[2] for c in cols)
    mismatches = []
    for c in cols:
        for p, T, a in c[3]:
            mismatches.append((p, T, a, _p2_answer(N, p, T, p2, p2_solver)))
    return DisparityReport(
        alpha=agree / total if total else 1.0,
        beta=agree_hi / n_hi if n_hi else 1.0,
        grid_points_total=total,
        grid_points_pT_gt_1=n_hi,
        mismatches=mismatches,
    )


def _p2_answer(N, p, T, mode, solver):
    if solver is not None:
        b = solver(N, p, T)
    else:
        b = argmax_p2(SystemParams(N, p, T))
    if isinstance(b, tuple):
        return b[0] if len(b) == 1 else list(b)
    return b
