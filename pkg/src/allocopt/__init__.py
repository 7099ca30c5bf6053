"""Storage allocation for distributed storage under memory limits."""
from .errors import (
    AllocError,
    DegenerateParameterError,
    DomainError,
    EnumerationSizeError,
    InfeasibleError,
    NoRootError,
    SecondObjectInfeasibleError,
)
from .exact_core import (
    Allocation,
    SuccessEstimate,
    SystemParams,
    binom_tail,
    evaluate,
    exact_success,
    monte_carlo_success,
    quasi_symmetric_success,
    symmetric_success,
)
from .memory_limited import (
    MemoryProfile,
    p0_approx,
    p0_solve,
    solve_arbitrary_profile,
    solve_constant_profile,
)
from .multi_object import TwoObjectSpec, allocate_two_objects, exhaustive_two_object, p4_objective
from .oracle import argmax_p1_full, conjecture_report, grid_search_alloc
from .q_relaxation import (
    DisparityReport,
    SolveOutcome,
    candidate_set,
    disparity_scan,
    q_function,
    relaxed_objective,
    solve_p1,
    solve_p2,
)

__version__ = "0.1.0"

__all__ = [
    "AllocError",
    "Allocation",
    "DegenerateParameterError",
    "DisparityReport",
    "DomainError",
    "EnumerationSizeError",
    "InfeasibleError",
    "MemoryProfile",
    "NoRootError",
    "SecondObjectInfeasibleError",
    "SolveOutcome",
    "SuccessEstimate",
    "SystemParams",
    "TwoObjectSpec",
    "allocate_two_objects",
    "argmax_p1_full",
    "binom_tail",
    "candidate_set",
    "conjecture_report",
    "disparity_scan",
    "evaluate",
    "exact_success",
    "exhaustive_two_object",
    "grid_search_alloc",
    "monte_carlo_success",
    "p0_approx",
    "p0_solve",
    "p4_objective",
    "q_function",
    "quasi_symmetric_success",
    "relaxed_objective",
    "solve_arbitrary_profile",
    "solve_constant_profile",
    "solve_p1",
    "solve_p2",
    "symmetric_success",
]
