import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from allocopt.errors import DomainError, EnumerationSizeError, InfeasibleError, SecondObjectInfeasibleError
from allocopt.exact_core import SystemParams, exact_success
from allocopt.memory_limited import MemoryProfile, solve_arbitrary_profile
from allocopt.multi_object import (
    TwoObjectSpec,
    _sequential,
    allocate_two_objects,
    exhaustive_two_object,
    p4_objective,
    two_object_score,
)
from allocopt.oracle import grid_search_alloc
from allocopt.q_relaxation import q_function, relaxed_objective

P = MemoryProfile.from_caps


def test_spec_validation():
    with pytest.raises(DomainError):
        TwoObjectSpec(0.0, 1.0, 0.5, 0.3)
    with pytest.raises(DomainError):
        TwoObjectSpec(1.0, 1.0, 1.5, 0.3)
    s = TwoObjectSpec(1.0, 2.0, 0.7, 0.3)
    assert s.demand_prob_1 + s.demand_prob_2 == pytest.approx(1.0, abs=1e-12)
    assert s.swapped().budgets == (2.0, 1.0)


def test_p4_single_object_reduction():
    spec = TwoObjectSpec(2.5, 1.3, 1.0, 0.4)
    assert p4_objective(5, 3, spec) == pytest.approx(relaxed_objective(5, SystemParams(5, 0.4, 2.5)))


def test_p4_symmetry():
    spec = TwoObjectSpec(2.0, 2.0, 0.5, 0.3)
    assert p4_objective(6, 6, spec) == pytest.approx(relaxed_objective(6, SystemParams(6, 0.3, 2.0)))


def test_p4_direct_evaluation():
    spec = TwoObjectSpec(2.0, 1.5, 0.7, 0.6)
    a = q_function((2 - 4 * 0.6) / math.sqrt(4 * 0.6 * 0.4))
    b = q_function((2 - 2 * 0.6) / math.sqrt(2 * 0.6 * 0.4))
    assert p4_objective(4, 2, spec) == pytest.approx(0.7 * a + 0.3 * b, abs=1e-15)


def test_p4_degenerate():
    with pytest.raises(DomainError):
        p4_objective(2, 2, TwoObjectSpec(1.0, 1.0, 0.5, 1.0))


def test_greedy_worked_example():
    x1, x2 = allocate_two_objects(TwoObjectSpec(1.4, 0.6, 0.8, 0.1), MemoryProfile.constant(4, 0.5))
    assert x1.amounts == pytest.approx((0.5, 0.5, 0.4, 0.0))
    assert x2.amounts == pytest.approx((0.0, 0.0, 0.1, 0.5))


def test_greedy_non_binding_matches_independent_solves():
    spec = TwoObjectSpec(2.0, 1.5, 0.6, 0.3)
    prof = MemoryProfile.constant(6, 10.0)
    x1, x2 = allocate_two_objects(spec, prof)
    for x, T in ((x1, 2.0), (x2, 1.5)):
        ref = solve_arbitrary_profile(SystemParams(6, 0.3, T), prof)
        assert x.support == ref.allocation.support
        assert exact_success(x, 0.3) == pytest.approx(ref.success_prob, abs=1e-12)


def test_greedy_saturates_when_budget_fills_memory():
    caps = (0.5, 0.8, 1.2, 0.5)
    spec = TwoObjectSpec(1.7, sum(caps) - 1.7, 0.6, 0.4)
    x1, x2 = allocate_two_objects(spec, P(caps))
    assert np.allclose(x1.as_array() + x2.as_array(), caps, atol=1e-9)


def test_infeasible_total():
    with pytest.raises(InfeasibleError):
        allocate_two_objects(TwoObjectSpec(1.0, 1.5, 0.5, 0.3), P((1.0, 1.0)))


def test_second_object_error():
    spec = TwoObjectSpec(1.0, 1.5, 0.5, 0.3)
    with pytest.raises(SecondObjectInfeasibleError):
        _sequential(spec, np.array([1.0, 1.0]), 0)


def test_params_cross_check():
    with pytest.raises(DomainError):
        allocate_two_objects(TwoObjectSpec(1.0, 1.0, 0.5, 0.3), P((1.0,) * 3), SystemParams(4, 0.3, 2.0))


two_object_cases = st.tuples(
    st.lists(st.floats(0.2, 2.0), min_size=2, max_size=5),
    st.floats(0.1, 0.9), st.floats(0.05, 0.95), st.floats(0.02, 0.98), st.floats(0.2, 1.0),
)


@settings(max_examples=80, deadline=None)
@given(case=two_object_cases)
def test_joint_caps_hold(case):
    caps, split, p1, p, fill = case
    total = fill * sum(caps)
    spec = TwoObjectSpec(split * total, (1 - split) * total, p1, p)
    x1, x2 = allocate_two_objects(spec, P(caps))
    assert np.all(x1.as_array() + x2.as_array() <= np.asarray(caps) + 1e-9)
    assert x1.total == pytest.approx(spec.budget_1, abs=1e-9)
    assert x2.total == pytest.approx(spec.budget_2, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(case=two_object_cases)
def test_label_symmetry(case):
    caps, split, p1, p, fill = case
    assume(abs(p1 - 0.5) > 1e-6)
    total = fill * sum(caps)
    spec = TwoObjectSpec(split * total, (1 - split) * total, p1, p)
    a1, a2 = allocate_two_objects(spec, P(caps))
    b1, b2 = allocate_two_objects(spec.swapped(), P(caps))
    assert a1.amounts == pytest.approx(b2.amounts) and a2.amounts == pytest.approx(b1.amounts)


def test_exhaustive_reduction_to_single_object():
    prof = P((3.0, 3.0, 3.0))
    spec = TwoObjectSpec(2.0, 1.0, 1.0, 0.45)
    rep = exhaustive_two_object(spec, prof, 4)
    single = grid_search_alloc(SystemParams(3, 0.45, 2.0), prof, 4)
    assert rep.grid_best_score == pytest.approx(single.best_score, abs=1e-12)


def test_exhaustive_tiny_instance():
    rep = exhaustive_two_object(TwoObjectSpec(1.2, 0.8, 0.6, 0.5), P((0.9, 0.7, 0.8)), 4)
    assert rep.gap >= 0.0
    assert rep.oracle_score >= rep.greedy_score - 1e-9
    assert len(rep.strategy_scores) == 3
    d = rep.to_dict()
    for key in ("greedy_score", "oracle_score", "gap", "strategy_scores"):
        assert key in d
    x1, x2 = rep.greedy
    assert rep.greedy_score == pytest.approx(two_object_score(x1, x2, TwoObjectSpec(1.2, 0.8, 0.6, 0.5)))


def test_exhaustive_swap_symmetry_at_equal_demand():
    prof = P((0.9, 1.1, 0.8))
    spec = TwoObjectSpec(1.3, 1.1, 0.5, 0.6)
    a = exhaustive_two_object(spec, prof, 4)
    b = exhaustive_two_object(spec.swapped(), prof, 4)
    assert a.oracle_score == pytest.approx(b.oracle_score, abs=1e-12)


def test_exhaustive_size_bound():
    with pytest.raises(EnumerationSizeError):
        exhaustive_two_object(TwoObjectSpec(1.0, 1.0, 0.5, 0.5), P((1.0,) * 7), 4)
    with pytest.raises(EnumerationSizeError):
        exhaustive_two_object(TwoObjectSpec(1.0, 1.0, 0.5, 0.5), P((1.0,) * 3), 9)


@settings(max_examples=30, deadline=None)
@given(case=two_object_cases)
def test_oracle_dominates_greedy(case):
    caps, split, p1, p, fill = case
    assume(len(caps) <= 4)
    total = fill * sum(caps)
    spec = TwoObjectSpec(split * total, (1 - split) * total, p1, p)
    rep = exhaustive_two_object(spec, P(caps), 4)
    assert rep.oracle_score >= rep.greedy_score - 1e-9
