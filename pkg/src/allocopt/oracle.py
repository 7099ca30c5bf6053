"""Brute-force ground truth for the solvers on desk-scale instances."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .errors import EnumerationSizeError
from .exact_core import BUDGET_TOL, Allocation, SystemParams, exact_success, symmetric_success
from .memory_limited import MemoryProfile, solve_arbitrary_profile

MAX_GRID_NODES = 6
MAX_GRANULARITY = 12
SCORE_TIE_TOL = 1e-12


def compositions_colex(total: int, parts: int) -> Iterator[tuple]:
    """Weak compositions of ``total`` into ``parts`` parts, colexicographic order."""
    if parts == 1:
        yield (total,)
        return
    for last in range(total + 1):
        for head in compositions_colex(total - last, parts - 1):
            yield head + (last,)


@dataclass
class GridSearchResult:
    best_alloc: Allocation
    best_score: float
    evaluated: int
    runner_up_gap: float
    rows: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "best_alloc": list(self.best_alloc.amounts),
            "best_score": self.best_score,
            "evaluated": self.evaluated,
            "runner_up_gap": self.runner_up_gap,
        }


def _check_size(N: int, g: int) -> None:
    if N > MAX_GRID_NODES or g > MAX_GRANULARITY or g < 1:
        raise EnumerationSizeError(
            f"grid search limited to N <= {MAX_GRID_NODES}, 1 <= g <= {MAX_GRANULARITY}"
        )


def grid_allocations(N: int, T: float, g: int, caps: Optional[tuple] = None) -> Iterator[Allocation]:
    """Allocations with entries in multiples of ``T / g`` summing to ``T`` (colex order)."""
    for comp in compositions_colex(g, N):
        x = tuple(c * T / g for c in comp)
        if caps is not None and any(a > m + BUDGET_TOL for a, m in zip(x, caps)):
            continue
        yield Allocation(x)


def grid_search_alloc(params: SystemParams, profile: Optional[MemoryProfile], granularity: int,
                      keep_rows: bool = False) -> GridSearchResult:
    """Best grid allocation by exact recovery probability.

    Ties within ``SCORE_TIE_TOL`` go to the smaller support, then to the
    earlier colex position.
    """
    N, p, T = params.num_nodes, params.access_prob, params.budget
    _check_size(N, granularity)
    caps = profile.original_caps() if profile is not None else None
    if profile is not None and profile.N != N:
        raise ValueError("profile size does not match num_nodes")

    best = None
    best_key = None
    scores = []
    rows = []
    for alloc in grid_allocations(N, T, granularity, caps):
        s = exact_success(alloc, p)
        scores.append(s)
        if keep_rows:
            rows.append((alloc.amounts, s))
        if best is None or s > best_key[0] + SCORE_TIE_TOL or (
            abs(s - best_key[0]) <= SCORE_TIE_TOL and alloc.support < best_key[1]
        ):
            best, best_key = alloc, (s, alloc.support)
    if best is None:
        raise EnumerationSizeError("no grid allocation satisfies the caps")
    scores.sort(reverse=True)
    gap = scores[0] - scores[1] if len(scores) > 1 else 0.0
    return GridSearchResult(best, best_key[0], len(scores), max(0.0, gap), rows)


def rows_csv(result: GridSearchResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if not result.rows:
        return ""
    N = len(result.rows[0][0])
    w.writerow([f"x{i}" for i in range(1, N + 1)] + ["score"])
    for amounts, s in result.rows:
        w.writerow([f"{a:.12g}" for a in amounts] + [f"{s:.12g}"])
    return buf.getvalue()


def argmax_p1_full(params: SystemParams) -> int:
    """Scan every support size with the exact objective (smallest-n tie-break)."""
    best_n, best_v = 1, -math.inf
    for n in range(1, params.num_nodes + 1):
        v = symmetric_success(n, params)
        if v > best_v:
            best_n, best_v = n, v
    return best_n


def conjecture_report(params: SystemParams, profile: MemoryProfile, granularity: int) -> dict:
    """Score of the dispatched allocation against the grid optimum.

    ``gap = oracle - solver`` may be negative when the solver's allocation is
    off the grid.
    """
    _check_size(params.num_nodes, granularity)
    out = solve_arbitrary_profile(params, profile)
    solver_score = exact_success(out.allocation, params.access_prob)
    grid = grid_search_alloc(params, profile, granularity)
    gap = grid.best_score - solver_score
    return {
        "N": params.num_nodes,
        "p": params.access_prob,
        "T": params.budget,
        "caps": list(profile.original_caps()),
        "case": out.case_label,
        "family": out.family,
        "allocation": list(out.allocation.amounts),
        "solver_score": solver_score,
        "oracle_score": grid.best_score,
        "oracle_alloc": list(grid.best_alloc.amounts),
        "evaluated": grid.evaluated,
        "gap": gap,
        "relative_gap": gap / grid.best_score if grid.best_score > 0 else 0.0,
        "notes": list(out.notes),
    }
