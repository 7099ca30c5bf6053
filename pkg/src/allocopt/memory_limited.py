"""Allocation under per-node memory caps.

Constant caps ``M``: when the budget no longer fits on ``floor(T)`` nodes the
quasi-symmetric allocation (``n_min - 1`` full nodes plus a residual) competes
with the smallest feasible symmetric one; the switch happens at the access
probability ``p0`` where their recovery probabilities cross.

Arbitrary caps: the full-load minimum-support (FLmin) and all-node (ANmax)
allocations compete with symmetric minimal / maximal spreading, decided by
capacity-weighted mean conditions derived from Markov's inequality.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import DomainError, InfeasibleError, NoRootError
from .exact_core import (
    BUDGET_TOL,
    MAX_EXACT_SUPPORT,
    Allocation,
    SystemParams,
    binom_tail,
    exact_success,
    monte_carlo_success,
    quasi_symmetric_success,
    snap_ceil,
    snap_floor,
    symmetric_success,
)
from .q_relaxation import SolveOutcome, classify_p2, pt_relation

P0_RESIDUAL_TOL = 1e-10
_BRACKET_POINTS = 4096
_TIE_REL = 1e-12
_MC_TRIALS = 200_000
_MC_SEED = 20130


@dataclass(frozen=True)
class MemoryProfile:
    """Per-node capacities, kept sorted ascending.

    ``order[k]`` is the caller's index of the node holding ``caps[k]``, so
    allocations computed on the sorted profile can be mapped back.
    """

    caps: tuple
    order: tuple

    @classmethod
    def from_caps(cls, caps: Sequence[float]) -> "MemoryProfile":
        arr = np.asarray(caps, dtype=float).ravel()
        if arr.size == 0:
            raise DomainError("memory profile is empty")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise DomainError("memory caps must be positive and finite")
        idx = np.argsort(arr, kind="stable")
        return cls(tuple(float(c) for c in arr[idx]), tuple(int(i) for i in idx))

    @classmethod
    def constant(cls, num_nodes: int, cap: float) -> "MemoryProfile":
        return cls.from_caps([cap] * num_nodes)

    def __len__(self) -> int:
        return len(self.caps)

    @property
    def N(self) -> int:
        return len(self.caps)

    @property
    def total(self) -> float:
        return math.fsum(self.caps)

    @property
    def m_stat(self) -> float:
        """Capacity-weighted mean ``sum(M_i**2) / sum(M_j)``."""
        return math.fsum(c * c for c in self.caps) / self.total

    @property
    def is_constant(self) -> bool:
        return self.caps[-1] - self.caps[0] <= 1e-12 * self.caps[-1]

    def original_caps(self) -> tuple:
        out = [0.0] * self.N
        for k, i in enumerate(self.order):
            out[i] = self.caps[k]
        return tuple(out)

    def to_original(self, sorted_amounts: Sequence[float]) -> Allocation:
        out = [0.0] * self.N
        for k, i in enumerate(self.order):
            out[i] = float(sorted_amounts[k])
        return Allocation(tuple(out))

    def to_sorted(self, alloc: Sequence[float]) -> np.ndarray:
        a = np.asarray(tuple(alloc), dtype=float)
        return a[list(self.order)]

    def respects(self, alloc: Sequence[float], tol: float = BUDGET_TOL) -> bool:
        return bool(np.all(np.asarray(tuple(alloc)) <= np.asarray(self.original_caps()) + tol))


@dataclass(frozen=True)
class QuasiSymmetricSpec:
    n: int
    full_level: float
    residual: float


@dataclass(frozen=True, kw_only=True)
class ConstantProfileOutcome(SolveOutcome):
    p0: Optional[float] = None
    p0_method: Optional[str] = None
    candidate_set_M: tuple = ()
    L0: Optional[int] = None
    n_min: Optional[int] = None


# -- constant profile -----------------------------------------------------------


def n_min_const(T: float, M: float) -> int:
    if M <= 0 or T <= 0:
        raise DomainError("need positive budget and capacity")
    return snap_ceil(T / M)


def smallest_l0(n_min: int, T: float) -> int:
    """Smallest integer ``L0`` with ``n_min <= floor(L0 * T)``."""
    if n_min < 1 or T < 1.0 - 1e-12:
        raise DomainError("need n_min >= 1 and T >= 1")
    L0 = 1
    while snap_floor(L0 * T) < n_min:
        L0 += 1
    return L0


def quasi_spec(T: float, M: float) -> QuasiSymmetricSpec:
    """``n_min - 1`` nodes at ``M`` and the residual ``T - M (n_min - 1)``."""
    n = n_min_const(T, M)
    R = T - M * (n - 1)
    return QuasiSymmetricSpec(n=n, full_level=M, residual=min(R, M))


def _crossover_parts(p: float, qs: QuasiSymmetricSpec, n_sym: int, k_sym: int) -> tuple[float, float]:
    return (quasi_symmetric_success(qs.n, qs.full_level, qs.residual, p),
            binom_tail(n_sym, p, min(k_sym, n_sym + 1)))


def _crossover_residual(p: float, qs: QuasiSymmetricSpec, n_sym: int, k_sym: int) -> float:
    a, b = _crossover_parts(p, qs, n_sym, k_sym)
    return a - b


def p0_residual(p: float, T: float, M: float) -> float:
    """Quasi-symmetric minus minimal symmetric recovery probability at ``p``."""
    qs = quasi_spec(T, M)
    L0 = smallest_l0(qs.n, T)
    return _crossover_residual(p, qs, snap_floor(L0 * T), L0)


def _crossover(T: float, qs: QuasiSymmetricSpec, n_sym: int, k_sym: int) -> float:
    """Root of the crossover residual on ``(0, 1/T)`` by bracketed bisection."""
    hi = min(1.0, 1.0 / T)
    grid = hi * np.arange(1, _BRACKET_POINTS + 1) / _BRACKET_POINTS
    parts = np.array([_crossover_parts(float(p), qs, n_sym, k_sym) for p in grid])
    res = parts[:, 0] - parts[:, 1]
    # differences at rounding level are ties, not signs
    res[np.abs(res) <= _TIE_REL * parts.max(axis=1)] = 0.0
    if not res.any():
        raise NoRootError("quasi-symmetric and symmetric recovery probabilities coincide on (0, 1/T)")
    if not (res[0] > 0 and res[-1] < 0):
        raise NoRootError(
            f"residual does not go from positive near 0 to negative at 1/T "
            f"(got {res[0]:.3g} and {res[-1]:.3g})"
        )
    j = int(np.argmax(res < 0))
    a, b = float(grid[j - 1]), float(grid[j])
    if res[j - 1] <= 0:
        raise NoRootError("no clean sign change on the bracket")
    f = lambda p: _crossover_residual(p, qs, n_sym, k_sym)  # noqa: E731
    root = optimize.bisect(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(f(root)) > P0_RESIDUAL_TOL:
        raise NoRootError(f"bisection residual {f(root):.3g} above tolerance")
    return root


def p0_solve(T: float, M: float) -> float:
    """Access probability at which quasi-symmetric and minimal symmetric tie."""
    qs = quasi_spec(T, M)
    if qs.n < 2 or T < 1.0 - 1e-12:
        raise DomainError("p0 is defined only when the cap binds (ceil(T/M) >= 2) and T >= 1")
    L0 = smallest_l0(qs.n, T)
    return _crossover(T, qs, snap_floor(L0 * T), L0)


def p0_approx(T: float, M: float) -> float:
    """Closed-form approximation of ``p0`` (Taylor expansion of the Q relaxation)."""
    qs = quasi_spec(T, M)
    if qs.n < 2 or T < 1.0 - 1e-12:
        raise DomainError("p0 is defined only when the cap binds (ceil(T/M) >= 2) and T >= 1")
    L0 = smallest_l0(qs.n, T)
    nL = snap_floor(L0 * T)
    c1 = snap_ceil(1.0 / M)
    cR = snap_ceil((1.0 - qs.residual) / M)
    k = qs.n - 1
    num = c1 - L0 * math.sqrt(k / nL)
    den = k - math.sqrt(k * nL) + c1 - cR
    if den == 0:
        raise DomainError("degenerate approximation: zero denominator")
    return num / den


def _wrap(base: SolveOutcome, **extra) -> ConstantProfileOutcome:
    return ConstantProfileOutcome(
        case_label=base.case_label, n_star=base.n_star, allocation=base.allocation,
        success_prob=base.success_prob, family=base.family,
        success_method=base.success_method, notes=base.notes, **extra,
    )


def _sym(label, n_star, params: SystemParams, notes=()) -> SolveOutcome:
    rep = n_star[0] if isinstance(n_star, tuple) else n_star
    return SolveOutcome(
        case_label=label, n_star=n_star,
        allocation=Allocation.symmetric(params.num_nodes, rep, params.budget),
        success_prob=symmetric_success(rep, params), family="symmetric", notes=tuple(notes),
    )


def _check_budget(T: float) -> None:
    if T < 1.0 - 1e-12:
        raise InfeasibleError(f"budget T={T} < 1 can never recover a unit object")


def solve_constant_profile(params: SystemParams, M: float) -> ConstantProfileOutcome:
    """Optimal allocation family for ``N`` nodes that each hold at most ``M``."""
    N, p, T = params.num_nodes, params.access_prob, params.budget
    if M <= 0:
        raise DomainError("capacity must be positive")
    _check_budget(T)
    if T > N * M + BUDGET_TOL:
        raise InfeasibleError(
            f"budget T={T} exceeds total memory N*M={N * M}; "
            "an allocation exists only for min M_i < T <= sum M_i"
        )
    if T <= M + BUDGET_TOL:
        label, n_star = classify_p2(N, p, T)
        base = _sym(label, n_star, params, notes=("memory cap does not bind",))
        return _wrap(base, n_min=1, L0=1,
                     candidate_set_M=tuple(sorted({snap_floor(i * T) for i in range(1, snap_floor(N / T) + 1)} | {N})))

    qs = quasi_spec(T, M)
    L = snap_floor(N / T)
    L0 = smallest_l0(qs.n, T)
    NM = tuple(sorted({snap_floor(i * T) for i in range(L0, L + 1)} | {N}))
    common = dict(n_min=qs.n, L0=L0, candidate_set_M=NM)
    rel = pt_relation(p, T)

    if rel < 0:
        notes = []
        if snap_floor(L0 * T) <= N:
            n_sym, k_sym = snap_floor(L0 * T), L0
        else:
            n_sym, k_sym = N, snap_ceil(N / T)
            notes.append("floor(L0 T) > N: symmetric competitor is the all-node allocation")
        try:
            p0 = _crossover(T, qs, n_sym, k_sym)
            method = "exact-root"
            qs_wins = p <= p0
        except NoRootError as exc:
            p0, method = None, "direct-comparison"
            notes.append(f"no crossover on (0, 1/T): {exc}")
            qs_wins = _crossover_residual(p, qs, n_sym, k_sym) >= 0
        if qs_wins:
            out = SolveOutcome(
                case_label="Case1a", n_star=qs.n,
                allocation=Allocation.quasi_symmetric(N, qs.n, M, qs.residual),
                success_prob=quasi_symmetric_success(qs.n, M, qs.residual, p),
                family="quasi-symmetric", notes=tuple(notes),
            )
        else:
            out = _sym("Case1b", n_sym, params, notes)
        return _wrap(out, p0=p0, p0_method=method, **common)

    if rel == 0:
        tie = tuple(sorted({snap_floor(i * T) for i in range(L0, L + 1)}))
        notes = () if tie else ("L0 > L: only the all-node allocation is feasible",)
        return _wrap(_sym("Case2", tie or (N,), params, notes), **common)

    label, n_star = classify_p2(N, p, T)
    if L0 > L:
        return _wrap(_sym(label, N, params, ("L0 > L: all-node allocation",)), **common)
    return _wrap(_sym(label, n_star, params), **common)


# -- arbitrary profile ----------------------------------------------------------


def _check_profile_budget(profile: MemoryProfile, T: float) -> None:
    if T > profile.total + BUDGET_TOL:
        raise InfeasibleError(
            f"budget T={T} exceeds total memory {profile.total}; "
            "an allocation exists only for min M_i < T <= sum M_i"
        )


def n_min_profile(profile: MemoryProfile, T: float) -> int:
    """Fewest nodes whose largest caps can hold the whole budget."""
    _check_profile_budget(profile, T)
    acc = 0.0
    for n, c in enumerate(reversed(profile.caps), start=1):
        acc += c
        if acc >= T - BUDGET_TOL:
            return n
    return profile.N


def flmin_alloc(profile: MemoryProfile, T: float) -> Allocation:
    """Fill the ``n_min - 1`` largest nodes; the residual goes to the next one."""
    n = n_min_profile(profile, T)
    N = profile.N
    x = np.zeros(N)
    x[N - n + 1:] = profile.caps[N - n + 1:]
    x[N - n] = max(0.0, min(T - math.fsum(x), profile.caps[N - n]))
    return profile.to_original(x)


def condition_flmin(profile: MemoryProfile, T: float) -> bool:
    return profile.m_stat > T / n_min_profile(profile, T)


def n_max_profile(profile: MemoryProfile, T: float) -> int:
    """Largest ``n`` with ``T / n > M_{N-n}`` (ascending caps, 1-based).

    ``n = N`` (where ``M_0 = 0``) is taken only when the uniform share
    ``T / N`` fits every node; otherwise the search runs over ``n < N``.
    """
    _check_profile_budget(profile, T)
    N = profile.N
    caps = profile.caps
    if T / N <= caps[0] + BUDGET_TOL:
        return N
    for n in range(N - 1, 0, -1):
        if T / n > caps[N - n - 1]:
            return n
    return 1


def water_fill(profile: MemoryProfile, T: float) -> tuple[np.ndarray, float, int]:
    """Sorted amounts ``min(M_i, level)`` summing to ``T``, the level, and saturated count."""
    _check_profile_budget(profile, T)
    caps = np.asarray(profile.caps)
    N = len(caps)
    used = 0.0
    for k in range(N):
        level = (T - used) / (N - k)
        if level <= caps[k] + BUDGET_TOL:
            x = np.minimum(caps, level)
            return x, level, k
        used += caps[k]
    return caps.copy(), float(caps[-1]), N


def anmax_alloc(profile: MemoryProfile, T: float) -> Allocation:
    """All-node allocation: water-filling against the caps."""
    x, _, _ = water_fill(profile, T)
    return profile.to_original(x)


def condition_anmax(profile: MemoryProfile, T: float) -> bool:
    n_max = n_max_profile(profile, T)
    N = profile.N
    if n_max == N:
        return True
    return profile.m_stat * (N - n_max) > math.fsum(profile.caps[: N - n_max])


def anmax_markov_bound(profile: MemoryProfile, T: float, p: float) -> float:
    """Markov upper bound for the all-node allocation (``pT`` for symmetric)."""
    n_max = n_max_profile(profile, T)
    N = profile.N
    low = math.fsum(profile.caps[: N - n_max])
    return p * (T - low + profile.m_stat * (N - n_max))


def largest_l(n_max: int, T: float) -> int:
    """Largest ``L`` with ``floor(L * T) <= n_max``."""
    L = 0
    while snap_floor((L + 1) * T) <= n_max:
        L += 1
    return L


def symmetric_fits(profile: MemoryProfile, n: int, T: float) -> bool:
    return 1 <= n <= profile.N and T / n <= profile.caps[profile.N - n] + BUDGET_TOL


def symmetric_on_profile(profile: MemoryProfile, n: int, T: float) -> Allocation:
    """``T / n`` on each of the ``n`` largest-capacity nodes."""
    if not symmetric_fits(profile, n, T):
        raise InfeasibleError(f"symmetric allocation on {n} nodes exceeds a cap")
    x = np.zeros(profile.N)
    x[profile.N - n:] = T / n
    return profile.to_original(x)


def score_allocation(alloc: Allocation, p: float) -> tuple[float, str]:
    if alloc.support <= MAX_EXACT_SUPPORT:
        return exact_success(alloc, p), "exact-enumeration"
    return monte_carlo_success(alloc, p, _MC_TRIALS, _MC_SEED).value, "monte-carlo"


def _explicit(label, n_star, alloc, family, p, notes=()) -> SolveOutcome:
    score, how = score_allocation(alloc, p)
    return SolveOutcome(case_label=label, n_star=n_star, allocation=alloc, success_prob=score,
                        family=family, success_method=how, notes=tuple(notes))


def _symmetric_outcome(label, n_star, profile, params, notes=()) -> SolveOutcome:
    rep = n_star[0] if isinstance(n_star, tuple) else n_star
    alloc = symmetric_on_profile(profile, rep, params.budget)
    return SolveOutcome(case_label=label, n_star=n_star, allocation=alloc,
                        success_prob=symmetric_success(rep, params), family="symmetric",
                        notes=tuple(notes))


def solve_arbitrary_profile(params: SystemParams, profile: MemoryProfile) -> SolveOutcome:
    """Allocation family for an arbitrary memory profile.

    pT < 1: FLmin when the capacity-weighted mean beats ``T / n_min``,
    otherwise symmetric minimal spreading.  pT = 1: symmetric tie set
    ``{floor(L T) : L0 <= L <= L_max}``.  pT > 1: symmetric maximal spreading
    when the capacity-weighted mean beats the mean of the unused small caps,
    otherwise ANmax.  Symmetric choices
    that would overflow a cap fall back to the next feasible support, and
    to the asymmetric family when none exists (recorded in ``notes``).
    """
    N, p, T = params.num_nodes, params.access_prob, params.budget
    if N != profile.N:
        raise DomainError(f"profile has {profile.N} nodes, params say {N}")
    _check_budget(T)
    _check_profile_budget(profile, T)

    if T <= profile.caps[0] + BUDGET_TOL:
        label, n_star = classify_p2(N, p, T)
        return _symmetric_outcome(label, n_star, profile, params, ("memory cap does not bind",))
    if profile.is_constant:
        out = solve_constant_profile(params, profile.caps[0])
        return SolveOutcome(case_label=out.case_label, n_star=out.n_star,
                            allocation=profile.to_original(out.allocation.amounts),
                            success_prob=out.success_prob, family=out.family,
                            success_method=out.success_method,
                            notes=out.notes + ("constant profile",))

    n_min = n_min_profile(profile, T)
    L0 = smallest_l0(n_min, T)
    n_max = n_max_profile(profile, T)
    L_max = largest_l(n_max, T)
    rel = pt_relation(p, T)

    if rel < 0:
        if condition_flmin(profile, T):
            return _explicit("Case1a", n_min, flmin_alloc(profile, T), "flmin", p)
        supports = [snap_floor(i * T) for i in range(L0, snap_floor(N / T) + 1)] + [N]
        for n in supports:
            if symmetric_fits(profile, n, T):
                notes = () if n == snap_floor(L0 * T) else (f"floor(L0 T) overflows a cap; using n={n}",)
                return _symmetric_outcome("Case1b", n, profile, params, notes)
        return _explicit("Case1a", n_min, flmin_alloc(profile, T), "flmin", p,
                         ("no feasible symmetric allocation",))

    if rel == 0:
        tie = tuple(n for n in sorted({snap_floor(i * T) for i in range(L0, L_max + 1)})
                    if symmetric_fits(profile, n, T))
        if tie:
            return _symmetric_outcome("TieSet", tie, profile, params)
        return _explicit("Infeasible", (), flmin_alloc(profile, T), "flmin", p,
                         ("L_max <= L0 or no feasible support: conjectured tie set is empty",))

    if n_max == N:
        # Uniform share fits: the all-node allocation is symmetric at N.
        label, n_star = classify_p2(N, p, T)
        if symmetric_fits(profile, n_star, T):
            return _symmetric_outcome(label, n_star, profile, params)
        return _symmetric_outcome("Case4", N, profile, params,
                                  (f"n={n_star} overflows a cap; using all nodes",))
    _, level, saturated = water_fill(profile, T)
    diag = (f"water level {level:.12g}, saturated nodes {saturated}, n_max {n_max}",)
    if not condition_anmax(profile, T):
        return _explicit("Case4", N, anmax_alloc(profile, T), "anmax", p, diag)
    for L in range(L_max, L0 - 1, -1):
        n = snap_floor(L * T)
        if symmetric_fits(profile, n, T):
            return _symmetric_outcome("Case5", n, profile, params)
    return _explicit("Case4", N, anmax_alloc(profile, T), "anmax", p,
                     diag + ("no feasible symmetric maximal spreading",))
