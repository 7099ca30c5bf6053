import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from allocopt.errors import DegenerateParameterError, InfeasibleError
from allocopt.exact_core import SystemParams, snap_floor, symmetric_success
from allocopt.q_relaxation import (
    argmax_p2,
    candidate_set,
    classify_p2,
    curve_csv,
    disparity_scan,
    objective_curve,
    p1_argmax_over_p,
    pt_relation,
    q_function,
    relaxed_objective,
    solve_p1,
    solve_p2,
)


def test_q_function_values():
    assert q_function(0.0) == 0.5
    assert q_function(40.0) == pytest.approx(0.0, abs=1e-300)
    assert q_function(1.0) == pytest.approx(0.158655253931457, abs=1e-12)
    assert q_function(-1.0) == pytest.approx(1 - 0.158655253931457, abs=1e-12)


def test_relaxed_objective_examples():
    # ceil(n/T) == np gives a zero argument
    assert relaxed_objective(10, SystemParams(45, 0.2, 5.0)) == pytest.approx(0.5)
    v = relaxed_objective(40, SystemParams(45, 0.2, 10.0))
    assert v == pytest.approx(q_function((4 - 8) / math.sqrt(6.4)), abs=1e-15)
    assert v == pytest.approx(0.9431, abs=1e-4)
    w = relaxed_objective(10, SystemParams(45, 0.05, 10.0))
    assert w == pytest.approx(q_function(0.5 / math.sqrt(0.475)), abs=1e-15)
    assert w == pytest.approx(0.234, abs=1e-3)


def test_relaxed_objective_degenerate():
    with pytest.raises(DegenerateParameterError):
        relaxed_objective(3, SystemParams(5, 1.0, 2.0))
    with pytest.raises(DegenerateParameterError):
        relaxed_objective(3, SystemParams(5, 0.0, 2.0))


@pytest.mark.parametrize("N,T,expected", [
    (45, 10.0, (10, 20, 30, 40, 45)),
    (10, 10.0, (10,)),
    (7, 1.4, (1, 2, 4, 5, 7)),
])
def test_candidate_set(N, T, expected):
    assert candidate_set(SystemParams(N, 0.5, T)).values == expected


def test_candidate_set_rejects_small_budget():
    with pytest.raises(InfeasibleError):
        candidate_set(SystemParams(5, 0.5, 0.9))


@pytest.mark.parametrize("p,label,n_star", [(0.05, "Case1", 10), (0.2, "Case5", 40), (0.12, "Case4", 45)])
def test_solve_p2_examples(p, label, n_star):
    out = solve_p2(SystemParams(45, p, 10.0))
    assert (out.case_label, out.n_star) == (label, n_star)
    assert out.allocation.support == n_star
    assert out.success_prob == pytest.approx(symmetric_success(n_star, SystemParams(45, p, 10.0)))


def test_solve_p2_tie_set_at_pt_one():
    out = solve_p2(SystemParams(45, 0.1, 10.0))
    assert out.case_label == "Case2"
    assert out.n_star == (10, 20, 30, 40)


def test_solve_p1_examples():
    assert solve_p1(SystemParams(45, 0.2, 10.0)).n_star == 40
    assert solve_p1(SystemParams(10, 0.5, 10.0)).n_star == 10
    n = solve_p1(SystemParams(45, 0.1, 10.0)).n_star
    assert n in (10, 20, 30, 40)


def test_solve_p1_resolves_saturated_probabilities():
    # success rounds to 1.0 for several supports; log-failure ranking still separates them
    params = SystemParams(45, 0.9, 3.0)
    assert solve_p1(params).n_star == solve_p1(params, search="full-range").n_star


@given(N=st.integers(2, 30), p=st.floats(0.02, 0.98), T=st.floats(1.0, 30.0))
@settings(max_examples=100, deadline=None)
def test_solve_p2_structure(N, p, T):
    T = min(T, float(N))
    label, n_star = classify_p2(N, p, T)
    L = snap_floor(N / T)
    rel = pt_relation(p, T)
    if rel < 0:
        assert n_star == min(snap_floor(T), N)
    elif rel > 0:
        assert n_star in (snap_floor(L * T), N)


@given(N=st.integers(1, 45), p=st.floats(0.02, 0.98), T=st.floats(1.0, 45.0))
@settings(max_examples=80, deadline=None)
def test_candidate_restriction_loses_nothing(N, p, T):
    T = min(T, float(N))
    params = SystemParams(N, p, T)
    a = solve_p1(params).success_prob
    b = solve_p1(params, search="full-range").success_prob
    assert a == pytest.approx(b, abs=1e-12)


def test_argmax_p2_within_candidates():
    params = SystemParams(45, 0.2, 10.0)
    assert argmax_p2(params) == (40,)
    assert set(argmax_p2(SystemParams(45, 0.1, 10.0))) <= {10, 20, 30, 40}


def test_p1_vectorized_matches_scalar():
    ps = np.linspace(0.01, 0.99, 41)
    got = p1_argmax_over_p(20, 3.3, ps)
    want = [solve_p1(SystemParams(20, float(p), 3.3)).n_star for p in ps]
    assert list(got) == want


def test_objective_curve_single_point():
    rows = objective_curve(SystemParams(1, 0.3, 1.0))
    assert len(rows) == 1
    n, a, b = rows[0]
    assert n == 1 and a == pytest.approx(0.3)
    assert b == pytest.approx(q_function(0.7 / math.sqrt(0.21)))


def test_curve_argmaxes_coincide_for_fig_case():
    rows = objective_curve(SystemParams(45, 0.2, 10.0))
    assert max(rows, key=lambda r: r[1])[0] == max(rows, key=lambda r: r[2])[0] == 40


def test_curve_csv_header():
    text = curve_csv(objective_curve(SystemParams(3, 0.5, 1.5)))
    assert text.splitlines()[0] == "n,p1_objective,p2_objective"
    assert len(text.splitlines()) == 4


def test_scan_self_agreement():
    same = lambda N, p, T: solve_p1(SystemParams(N, p, T)).n_star  # noqa: E731
    rep = disparity_scan(6, p_step=0.05, t_step=0.5,
                         p1_solver=lambda N, T, ps: [same(N, float(p), T) for p in ps],
                         p2_solver=same)
    assert rep.alpha == 1.0 and rep.beta == 1.0 and rep.mismatches == []


def test_scan_counts_and_fields():
    rep = disparity_scan(5, p_step=0.1, t_step=0.5)
    assert rep.grid_points_total == 9 * 9
    assert set(rep.to_dict()) == {"alpha", "beta", "grid_points_total", "grid_points_pT_gt_1", "mismatches"}
    assert 0.0 <= rep.beta <= 1.0 and 0.0 <= rep.alpha <= 1.0


def test_scan_is_thread_count_independent(monkeypatch):
    monkeypatch.setenv("ALLOCOPT_THREADS", "1")
    a = disparity_scan(8, p_step=0.01, t_step=0.2)
    monkeypatch.setenv("ALLOCOPT_THREADS", "4")
    b = disparity_scan(8, p_step=0.01, t_step=0.2)
    assert a.to_dict() == b.to_dict()
