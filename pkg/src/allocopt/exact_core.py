"""Recovery-probability evaluation for storage allocations.

A data collector probes every node independently with probability ``p`` and
recovers the (unit-size, MDS-coded) object when the amounts it collected sum
to at least one unit.  This module evaluates that probability exactly for
arbitrary allocations (subset enumeration), in closed form for symmetric and
quasi-symmetric allocations (binomial tails), and by Monte Carlo.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence, Union

import numpy as np
from scipy import special

from .errors import DomainError, EnumerationSizeError

SNAP_TOL = 1e-9
BUDGET_TOL = 1e-9
MAX_EXACT_SUPPORT = 25
MC_CONFIDENCE = 0.99
_MC_CHUNK = 200_000


def snap(x: float) -> float:
    """Return the nearest integer when ``x`` is within ``SNAP_TOL`` of it."""
    r = round(x)
    if abs(x - r) <= SNAP_TOL:
        return float(r)
    return x


def snap_ceil(x: float) -> int:
    return int(math.ceil(snap(x)))


def snap_floor(x: float) -> int:
    return int(math.floor(snap(x)))


def recovers(total: float) -> bool:
    """Recovery condition ``total >= 1`` with the snap tolerance."""
    return total >= 1.0 - SNAP_TOL


def _check_prob(p: float, name: str = "p") -> None:
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise DomainError(f"{name}={p!r} is not a probability")


@dataclass(frozen=True)
class SystemParams:
    """Node count ``N``, access probability ``p`` and storage budget ``T``."""

    num_nodes: int
    access_prob: float
    budget: float

    def __post_init__(self):
        if int(self.num_nodes) != self.num_nodes or self.num_nodes < 1:
            raise DomainError(f"num_nodes must be a positive integer, got {self.num_nodes!r}")
        _check_prob(self.access_prob, "access_prob")
        if not self.budget > 0 or not math.isfinite(self.budget):
            raise DomainError(f"budget must be positive, got {self.budget!r}")
        object.__setattr__(self, "num_nodes", int(self.num_nodes))
        object.__setattr__(self, "access_prob", float(self.access_prob))
        object.__setattr__(self, "budget", float(self.budget))

    @property
    def N(self) -> int:
        return self.num_nodes

    @property
    def p(self) -> float:
        return self.access_prob

    @property
    def T(self) -> float:
        return self.budget


@dataclass(frozen=True)
class Allocation:
    """Per-node stored amounts, in units of the object size."""

    amounts: tuple

    def __post_init__(self):
        amounts = tuple(float(a) for a in self.amounts)
        for a in amounts:
            if not math.isfinite(a) or a < 0:
                raise DomainError(f"allocation entries must be finite and >= 0, got {a!r}")
        object.__setattr__(self, "amounts", amounts)

    @classmethod
    def symmetric(cls, num_nodes: int, n: int, budget: float) -> "Allocation":
        """``n`` leading nodes store ``budget / n`` each; the rest are empty."""
        if not 1 <= n <= num_nodes:
            raise DomainError(f"support {n} outside 1..{num_nodes}")
        share = budget / n
        return cls((share,) * n + (0.0,) * (num_nodes - n))

    @classmethod
    def quasi_symmetric(cls, num_nodes: int, n: int, full_level: float, residual: float) -> "Allocation":
        if not 1 <= n <= num_nodes:
            raise DomainError(f"support {n} outside 1..{num_nodes}")
        return cls((full_level,) * (n - 1) + (residual,) + (0.0,) * (num_nodes - n))

    def __len__(self) -> int:
        return len(self.amounts)

    def __iter__(self):
        return iter(self.amounts)

    def __getitem__(self, i):
        return self.amounts[i]

    @property
    def total(self) -> float:
        return math.fsum(self.amounts)

    @property
    def support(self) -> int:
        return sum(1 for a in self.amounts if a > 0)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.amounts, dtype=float)

    def within_budget(self, budget: float) -> bool:
        return self.total <= budget + BUDGET_TOL


AllocLike = Union[Allocation, Sequence[float], np.ndarray]


def as_allocation(alloc: AllocLike) -> Allocation:
    if isinstance(alloc, Allocation):
        return alloc
    return Allocation(tuple(np.asarray(alloc, dtype=float).ravel()))


@dataclass(frozen=True)
class SuccessEstimate:
    value: float
    method: str  # "exact-enumeration" | "closed-form" | "monte-carlo"
    ci_halfwidth: float = 0.0
    trials: int = 0


# -- binomial machinery -------------------------------------------------------


def _log_comb(n: int, i: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(i + 1) - math.lgamma(n - i + 1)


def binom_pmf(n: int, p: float, i: int) -> float:
    """``C(n, i) p**i (1-p)**(n-i)`` evaluated in the log domain."""
    _check_prob(p)
    if n < 0 or i < 0 or i > n:
        raise DomainError(f"need 0 <= i <= n, got n={n}, i={i}")
    if p == 0.0:
        return 1.0 if i == 0 else 0.0
    if p == 1.0:
        return 1.0 if i == n else 0.0
    return math.exp(_log_comb(n, i) + i * math.log(p) + (n - i) * math.log1p(-p))


def binom_tail(n: int, p: float, k: int) -> float:
    """P[B(n, p) >= k] for ``0 <= k <= n + 1``."""
    _check_prob(p)
    if n < 0 or k < 0 or k > n + 1:
        raise DomainError(f"need 0 <= k <= n+1, got n={n}, k={k}")
    if k == 0:
        return 1.0
    if k == n + 1:
        return 0.0
    return min(1.0, math.fsum(binom_pmf(n, p, i) for i in range(k, n + 1)))


def binom_tail_array(n: int, p: np.ndarray, k: int) -> np.ndarray:
    """Vectorised :func:`binom_tail` over an array of access probabilities."""
    p = np.asarray(p, dtype=float)
    if k <= 0:
        return np.ones_like(p)
    if k > n:
        return np.zeros_like(p)
    i = np.arange(k, n + 1, dtype=float)
    log_c = special.gammaln(n + 1) - special.gammaln(i + 1) - special.gammaln(n - i + 1)
    pp = p[..., None]
    logs = log_c + special.xlogy(i, pp) + special.xlog1py(n - i, -pp)
    return np.minimum(1.0, np.exp(logs).sum(axis=-1))


def binom_log_lower(n: int, p: float, k: int) -> float:
    """``log P[B(n, p) < k]``; stays informative where the upper tail rounds to 1."""
    _check_prob(p)
    if n < 0 or k < 0 or k > n + 1:
        raise DomainError(f"need 0 <= k <= n+1, got n={n}, k={k}")
    if k == 0:
        return -math.inf
    return float(binom_log_lower_array(n, np.asarray(p, dtype=float), k))


def binom_log_lower_array(n: int, p: np.ndarray, k: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if k <= 0:
        return np.full_like(p, -np.inf)
    if k > n:
        return np.zeros_like(p)
    i = np.arange(0, k, dtype=float)
    log_c = special.gammaln(n + 1) - special.gammaln(i + 1) - special.gammaln(n - i + 1)
    pp = p[..., None]
    with np.errstate(divide="ignore"):
        logs = log_c + special.xlogy(i, pp) + special.xlog1py(n - i, -pp)
    return np.minimum(0.0, special.logsumexp(logs, axis=-1))


def symmetric_success(n: int, params: SystemParams) -> float:
    """Recovery probability when ``n`` nodes each store ``T / n``."""
    if n < 1:
        raise DomainError(f"support size must be >= 1, got {n}")
    if n > params.num_nodes:
        raise DomainError(f"support size {n} exceeds N={params.num_nodes}")
    k = snap_ceil(n / params.budget)
    if k > n:
        return 0.0
    return binom_tail(n, params.access_prob, k)


def symmetric_log_failure(n: int, params: SystemParams) -> float:
    """``log(1 - symmetric_success)`` computed from the lower tail directly."""
    if not 1 <= n <= params.num_nodes:
        raise DomainError(f"support size {n} outside 1..{params.num_nodes}")
    k = snap_ceil(n / params.budget)
    if k > n:
        return 0.0
    return binom_log_lower(n, params.access_prob, k)


def quasi_symmetric_success(n: int, full_level: float, residual: float, p: float) -> float:
    """Recovery probability of ``n - 1`` nodes at ``full_level`` plus one at ``residual``.

    Conditioning on whether the residual node is reached gives
    ``p * P[B(n-1) >= ceil((1-R)/M)] + (1-p) * P[B(n-1) >= ceil(1/M)]``.
    """
    M, R = full_level, residual
    if not 0 < R <= M + SNAP_TOL:
        raise DomainError(f"need 0 < residual <= full_level, got R={R}, M={M}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    _check_prob(p)
    m = n - 1

    def tail(threshold: float) -> float:
        k = max(0, snap_ceil(threshold))
        return 0.0 if k > m else binom_tail(m, p, k)

    return p * tail((1.0 - R) / M) + (1.0 - p) * tail(1.0 / M)


# -- arbitrary allocations ------------------------------------------------------


def _half_table(xs: np.ndarray, p: float) -> tuple[np.ndarray, np.ndarray]:
    """All subset sums of ``xs`` with their probability weights."""
    k = len(xs)
    masks = ((np.arange(1 << k)[:, None] >> np.arange(k)) & 1).astype(bool)
    sums = masks.astype(float) @ xs if k else np.zeros(1)
    sizes = masks.sum(axis=1)
    weights = np.power(p, sizes) * np.power(1.0 - p, k - sizes)
    return sums, weights


def exact_success(alloc: AllocLike, p: float) -> float:
    """Exact recovery probability by enumerating every accessed subset.

    Zero entries are pruned first.  The remaining support is split in two
    halves; for each subset of the first half the matching subsets of the
    second half are counted from a sorted table, so the work is
    ``O(2**(s/2) * s)`` while the result is the full power-set sum.
    """
    _check_prob(p)
    x = as_allocation(alloc).as_array()
    x = x[x > 0]
    s = len(x)
    if s > MAX_EXACT_SUPPORT:
        raise EnumerationSizeError(
            f"support {s} exceeds {MAX_EXACT_SUPPORT} nodes; use monte_carlo_success"
        )
    if s == 0:
        return 0.0
    a_sums, a_w = _half_table(x[: s // 2], p)
    b_sums, b_w = _half_table(x[s // 2:], p)
    order = np.argsort(b_sums, kind="stable")
    b_sorted = b_sums[order]
    suffix = np.concatenate([np.cumsum(b_w[order][::-1])[::-1], [0.0]])
    idx = np.searchsorted(b_sorted, (1.0 - SNAP_TOL) - a_sums, side="left")
    total = math.fsum(a_w * suffix[idx])
    return min(1.0, max(0.0, total))


def brute_force_success(alloc: AllocLike, p: float) -> float:
    """Literal power-set sum, one subset at a time.  Slow; used as an oracle."""
    x = as_allocation(alloc).amounts
    n = len(x)
    terms = []
    for r in range(n + 1):
        for subset in itertools.combinations(range(n), r):
            if recovers(math.fsum(x[i] for i in subset)):
                terms.append(p ** r * (1.0 - p) ** (n - r))
    return math.fsum(terms)


def _z_score(confidence: float) -> float:
    return NormalDist().inv_cdf(0.5 + confidence / 2.0)


def _estimate(hits: int, trials: int) -> SuccessEstimate:
    value = hits / trials
    half = _z_score(MC_CONFIDENCE) * math.sqrt(value * (1.0 - value) / trials)
    return SuccessEstimate(value=value, method="monte-carlo", ci_halfwidth=half, trials=trials)


def monte_carlo_success(alloc: AllocLike, p: float, trials: int, seed: int) -> SuccessEstimate:
    """Simulate node accesses; the half-width is a 99% normal-approximation interval."""
    _check_prob(p)
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    x = as_allocation(alloc).as_array()
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < trials:
        m = min(_MC_CHUNK, trials - done)
        accessed = rng.random((m, len(x))) < p
        hits += int(np.count_nonzero(accessed @ x >= 1.0 - SNAP_TOL))
        done += m
    return _estimate(hits, trials)


def with_replacement_success(alloc: AllocLike, p: float, trials: int, seed: int) -> SuccessEstimate:
    """Monte Carlo of the i.i.d. model behind the Markov bound.

    ``K ~ B(n, p)`` draws are taken *with replacement* from the non-zero
    entries of ``alloc``; success when the drawn amounts sum to one unit.
    """
    _check_prob(p)
    x = as_allocation(alloc).as_array()
    x = x[x > 0]
    if len(x) == 0:
        raise DomainError("allocation has empty support")
    rng = np.random.default_rng(seed)
    n = len(x)
    hits = 0
    done = 0
    while done < trials:
        m = min(_MC_CHUNK, trials - done)
        k = rng.binomial(n, p, size=m)
        picks = x[rng.integers(0, n, size=(m, n))]
        picks[np.arange(n)[None, :] >= k[:, None]] = 0.0
        hits += int(np.count_nonzero(picks.sum(axis=1) >= 1.0 - SNAP_TOL))
        done += m
    return _estimate(hits, trials)


def markov_bound(alloc: AllocLike, p: float) -> float:
    """``min(1, m_X * n * p)`` with ``m_X`` the mean non-zero entry and ``n`` the support."""
    _check_prob(p)
    x = [a for a in as_allocation(alloc) if a > 0]
    if not x:
        raise DomainError("markov_bound needs a non-empty support")
    mean = math.fsum(x) / len(x)
    return min(1.0, mean * len(x) * p)


def evaluate(alloc: AllocLike, p: float, method: str = "exact", trials: int = 10 ** 6,
             seed: int = 0) -> SuccessEstimate:
    """Dispatch helper used by the CLI ``eval`` command."""
    alloc = as_allocation(alloc)
    if method == "exact":
        return SuccessEstimate(exact_success(alloc, p), "exact-enumeration")
    if method == "mc":
        return monte_carlo_success(alloc, p, trials, seed)
    if method == "closed":
        return SuccessEstimate(closed_form_success(alloc, p), "closed-form")
    raise DomainError(f"unknown method {method!r}")


def closed_form_success(alloc: AllocLike, p: float) -> float:
    """Closed-form evaluation; only symmetric and quasi-symmetric shapes qualify."""
    x = sorted((a for a in as_allocation(alloc) if a > 0), reverse=True)
    if not x:
        return 0.0
    n = len(x)
    top = x[0]
    if all(abs(a - top) <= SNAP_TOL for a in x):
        return symmetric_success(n, SystemParams(n, p, math.fsum(x)))
    if all(abs(a - top) <= SNAP_TOL for a in x[:-1]):
        return quasi_symmetric_success(n, top, x[-1], p)
    raise DomainError("closed form needs a symmetric or quasi-symmetric allocation")
