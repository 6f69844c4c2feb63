import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saddle_vr import diagnostics
from saddle_vr.core import GradientTable, ProblemConstants, RateConstants, default_step_size, rate_constants
from saddle_vr.diagnostics import (
    InequalityCheck,
    PointSagaState,
    check_contraction,
    check_lemma1,
    check_lemma2,
    check_theorem1,
    corollary_envelope,
    estimate_rate,
    lyapunov_value,
    point_saga_states,
    point_saga_transition,
)
from saddle_vr.problems import random_quadratic, separable_demo, two_component_demo
from saddle_vr.solvers import SolverConfig, TraceRow, run


def test_lyapunov_value_example():
    # separable demo: g* = 0, c = 1, n = 1; table term 1 + 1, distance term 1
    rc = default_step_size(separable_demo().constants)
    rep = lyapunov_value(separable_demo(), np.array([[1.0, 1.0]]), np.array([1.0, 0.0]), rc, np.zeros(2))
    assert (rep.t_value, rep.table_term, rep.dist_term, rep.alpha) == (3.0, 2.0, 1.0, 0.5)


def test_lyapunov_matches_trace_column():
    prob = random_quadratic(6, 2, 1, 0.2, 8.0, rng=1)
    res = run(prob, SolverConfig(epochs=3, trace_every=6))
    rc = rate_constants(prob.constants, res.gamma)
    rep = lyapunov_value(prob, res.extras["table"], res.final, rc, prob.saddle_point())
    assert rep.t_value == pytest.approx(res.rows[-1].lyapunov, rel=1e-12)


def test_lyapunov_table_shape_checked():
    rc = default_step_size(separable_demo().constants)
    with pytest.raises(ValueError):
        lyapunov_value(separable_demo(), np.zeros((2, 2)), np.zeros(2), rc, np.zeros(2))


def test_inequality_check_orientation():
    assert InequalityCheck.of(2.0, 1.0).passed
    assert InequalityCheck.of(1.0, 1.0).passed
    assert InequalityCheck.of(1.0 - 1e-10, 1.0).passed
    c = InequalityCheck.of(1.0, 2.0)
    assert not c.passed and c.slack == -1.0
    assert c.to_dict() == {"lhs": 1.0, "rhs": 2.0, "slack": -1.0, "passed": False}


def test_lemma1_tight_on_pure_quadratic():
    # g(z) = z exactly and mu = 1: both sides equal |p1 - p2|^2
    c = check_lemma1(separable_demo(), 0, 1.0, (np.array([1.0, 2.0]), np.array([-1.0, 0.5])))
    assert c.lhs == c.rhs == 6.25
    assert c.slack == 0.0 and c.passed


def test_lemma2_and_theorem1_on_bilinear_example():
    prob = two_component_demo()
    pair = (np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    for fn in (check_lemma1, check_lemma2, check_theorem1):
        for i in range(2):
            for gamma in (0.01, 1.0, 100.0):
                assert fn(prob, i, gamma, pair).passed


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), log_gamma=st.floats(-3, 3), log_mu=st.floats(-3, 3),
       log_kappa=st.floats(0, 4))
def test_structural_inequalities_random(seed, log_gamma, log_mu, log_kappa):
    prob = random_quadratic(1, 2, 2, 10.0**log_mu, 10.0**log_kappa, rng=seed,
                            sym_fraction=(seed % 7) / 6)
    rng = np.random.default_rng(seed)
    pair = (rng.standard_normal(4), rng.standard_normal(4))
    gamma = 10.0**log_gamma
    for fn in (check_lemma1, check_lemma2, check_theorem1):
        assert fn(prob, 0, gamma, pair).passed


def test_transition_matches_solver_step():
    prob = random_quadratic(3, 1, 2, 0.5, 4.0, rng=2)
    gamma = 0.3
    z = np.array([0.1, -0.4, 0.9])
    table = GradientTable(prob.all_grads(z), d_x=1)
    z_new, g_new = point_saga_transition(prob, z, table.entries, table.mean, gamma, 1)
    np.testing.assert_allclose(g_new, prob.grad(1, z_new), rtol=1e-10, atol=1e-12)


def test_contraction_holds_along_run():
    prob = random_quadratic(2, 2, 2, 1.0, 10.0, rng=3)
    rc = default_step_size(prob.constants)
    states = point_saga_states(prob, rc.gamma, 50, start=np.ones(4), rng=0)
    assert len(states) == 50
    assert all(check_contraction(prob, s, rc).passed for s in states)


def test_contraction_fails_with_oversized_step():
    prob = random_quadratic(2, 2, 2, 1.0, 10.0, rng=3)
    base = default_step_size(prob.constants)
    big = RateConstants(gamma=10 * base.gamma, alpha=1 / (1 + 10 * base.gamma), c=base.c)
    states = point_saga_states(prob, big.gamma, 50, start=np.ones(4), rng=0)
    assert sum(not check_contraction(prob, s, big).passed for s in states) > 0


def test_contraction_at_saddle_is_zero():
    prob = random_quadratic(2, 1, 1, 1.0, 5.0, rng=0)
    z_star = prob.saddle_point()
    table = GradientTable(prob.saddle_operator_values(z_star), d_x=1)
    c = check_contraction(prob, PointSagaState(z_star, table), default_step_size(prob.constants))
    assert c.lhs == pytest.approx(0.0, abs=1e-28) and c.rhs == pytest.approx(0.0, abs=1e-28)


def test_sampled_expectation_approaches_enumeration():
    prob = random_quadratic(5, 1, 1, 1.0, 5.0, rng=4)
    rc = default_step_size(prob.constants)
    state = point_saga_states(prob, rc.gamma, 3, start=np.ones(2), rng=1)[-1]
    exact = check_contraction(prob, state, rc)
    sampled = check_contraction(prob, state, rc, samples=20000, rng=0)
    assert sampled.lhs == exact.lhs
    assert sampled.rhs == pytest.approx(exact.rhs, rel=0.05)


def test_enumeration_budget(monkeypatch):
    prob = random_quadratic(3, 1, 1, 1.0, 5.0, rng=0)
    rc = default_step_size(prob.constants)
    state = point_saga_states(prob, rc.gamma, 1, rng=0)[0]
    monkeypatch.setattr(diagnostics, "MAX_ENUMERATION", 2)
    with pytest.raises(ValueError):
        check_contraction(prob, state, rc)
    assert check_contraction(prob, state, rc, samples=10, rng=0).passed


def _rows(values):
    return [TraceRow(iter=k, grad_evals=k, dist_sq=v) for k, v in enumerate(values)]


def test_estimate_rate_geometric():
    assert estimate_rate(_rows([0.9**k for k in range(100)])) == pytest.approx(0.9, rel=1e-12)
    assert estimate_rate([(k, 2.0 * 0.5**k) for k in range(40)], burn_in_fraction=0.0) == pytest.approx(0.5)


def test_estimate_rate_clips_growth_and_validates():
    assert estimate_rate(_rows([1.1**k for k in range(40)])) == 1.0
    with pytest.raises(ValueError):
        estimate_rate(_rows([1.0] * 23))  # 19 rows remain after burn-in
    with pytest.raises(ValueError):
        estimate_rate(_rows([1.0] * 30 + [0.0]))
    with pytest.raises(ValueError):
        estimate_rate(_rows([1.0] * 30 + [math.nan]))
    with pytest.raises(ValueError):
        estimate_rate(_rows([1.0] * 30), burn_in_fraction=1.0)


def test_estimate_rate_accepts_run_result():
    res = run(separable_demo(), SolverConfig(epochs=40, trace_every=1), start=[1.0, 1.0])
    assert estimate_rate(res) == pytest.approx(0.25, rel=1e-9)


def test_corollary_envelope_example():
    rc = default_step_size(ProblemConstants(1, 1.0, 1.0))
    np.testing.assert_allclose(corollary_envelope(rc, 1.0, 2.0, [0, 1, 2]), [4.0, 2.0, 1.0])


def test_point_saga_states_are_independent_copies():
    prob = random_quadratic(3, 1, 1, 1.0, 5.0, rng=0)
    states = point_saga_states(prob, 0.1, 5, rng=0)
    assert states[0].table.entries is not states[1].table.entries
    assert not np.array_equal(states[0].point, states[4].point)
