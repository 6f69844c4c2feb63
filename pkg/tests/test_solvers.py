import math

import numpy as np
import pytest

from saddle_vr.core import GradientTable, default_step_size
from saddle_vr.problems import random_nonsmooth, random_quadratic, separable_demo
from saddle_vr.solvers import (
    METHODS,
    STEP_GRID,
    RunResult,
    SolverConfig,
    TraceRow,
    default_tau,
    measured_bounds,
    nonsmooth_bound,
    point_saga_steps,
    run,
    score,
    tune,
)
from saddle_vr.solvers._tracking import Tracker, index_stream

SMOOTH = [m for m in METHODS if m != "point_saga_nonsmooth"]


@pytest.fixture(scope="module")
def quad():
    return random_quadratic(10, 2, 2, 0.1, 10.0, rng=0, sym_fraction=0.5)


def test_single_component_iterates_exact():
    # mu = L = 1, n = 1: gamma = 1 and each prox halves the iterate
    res = run(separable_demo(), SolverConfig(epochs=6, trace_every=1), start=[1.0, 1.0])
    assert res.gamma == 1.0
    assert [r.dist_sq for r in res.rows] == [2.0 * 0.25**k for k in range(6)]
    # c = 1: T = |z - z*|^2 + |g - g*|^2 with g = z on this problem
    assert [r.lyapunov for r in res.rows] == [4.0 * 0.25**k for k in range(6)]
    assert [r.grad_evals for r in res.rows] == list(range(1, 7))


def test_shifted_single_component_converges_to_shift():
    res = run(separable_demo(3.0), SolverConfig(epochs=60), start=[0.0, 0.0])
    np.testing.assert_allclose(res.final.joint(), [3.0, 3.0], atol=1e-12)


@pytest.mark.parametrize("method", [m for m in SMOOTH if m != "sfb"])
def test_saddle_is_fixed_point(quad, method):
    z_star = quad.saddle_point()
    cfg = SolverConfig(method=method, gamma=0.05 if method != "point_saga" else "auto", epochs=3)
    res = run(quad, cfg, start=z_star)
    assert max(r.dist_sq for r in res.rows) <= 1e-20
    assert res.status == "max_epochs"


def test_stochastic_gradient_is_not_stationary_at_saddle(quad):
    res = run(quad, SolverConfig(method="sfb", gamma=0.05, epochs=3), start=quad.saddle_point())
    assert res.final_dist_sq > 0


def test_stored_values_are_operator_values(quad):
    gamma = default_step_size(quad.constants).gamma
    rng = np.random.default_rng(3)
    z = rng.standard_normal(quad.dim)
    table = GradientTable(quad.all_grads(z), d_x=quad.d_x)
    cfg = SolverConfig(epochs=100)
    tracker = Tracker(quad, cfg, every=10**9)
    stream = iter([4, 1, 4, 7, 0, 4])
    z, it, evals, _ = point_saga_steps(quad, z, table, gamma, stream, tracker, 0, 0, 10**9)
    assert it == 6 and evals == 6
    # the last draw was component 4 at the final iterate
    g = quad.grad(4, z)
    assert np.linalg.norm(table.entries[4] - g) <= 1e-8 * (1 + np.linalg.norm(g))


def test_prox_inputs_are_unbiased(quad):
    gamma = default_step_size(quad.constants).gamma
    rng = np.random.default_rng(0)
    table = GradientTable(rng.standard_normal((quad.n, quad.dim)), d_x=quad.d_x)
    z = rng.standard_normal(quad.dim)
    p = z + gamma * (table.entries - table.mean)
    np.testing.assert_allclose(p.mean(axis=0), z, rtol=0, atol=1e-14)


def test_cost_accounting(quad):
    n = quad.n
    ps = run(quad, SolverConfig(method="point_saga", epochs=4, trace_every=1))
    assert all(r.grad_evals == n + r.iter for r in ps.rows)
    assert ps.rows[-1].grad_evals == 4 * n
    saga = run(quad, SolverConfig(method="saga", gamma=0.01, epochs=4, trace_every=1))
    assert all(r.grad_evals == n + r.iter for r in saga.rows[1:])
    assert saga.rows[0].grad_evals == 0
    svrg = run(quad, SolverConfig(method="svrg", gamma=0.01, m=5, epochs=4, trace_every=1))
    for r in svrg.rows[1:]:
        snapshots = math.ceil(r.iter / 5)
        assert r.grad_evals == snapshots * n + r.iter
    fb = run(quad, SolverConfig(method="fb", gamma=0.01, epochs=4))
    assert [r.grad_evals for r in fb.rows] == [0, n, 2 * n, 3 * n, 4 * n]
    for method in ("svrg_catalyst", "saga_catalyst", "sfb", "afb"):
        res = run(quad, SolverConfig(method=method, gamma=0.01, epochs=4))
        assert res.rows[-1].grad_evals <= 4 * n
        assert all(a.grad_evals <= b.grad_evals for a, b in zip(res.rows, res.rows[1:]))


def test_max_iter_caps_iterations(quad):
    res = run(quad, SolverConfig(method="point_saga", epochs=100, max_iter=7, trace_every=1))
    assert res.rows[-1].iter == 7
    res = run(quad, SolverConfig(method="fb", gamma=0.01, epochs=100, max_iter=3))
    assert res.rows[-1].iter == 3


@pytest.mark.parametrize("method", SMOOTH)
def test_runs_are_deterministic(quad, method):
    cfg = SolverConfig(method=method, gamma="auto" if method == "point_saga" else 0.02,
                       epochs=5, seed=7)
    a, b = run(quad, cfg), run(quad, cfg)
    strip = lambda res: [r.as_tuple()[:-1] for r in res.rows]
    assert strip(a) == strip(b)
    assert a.final.joint().tobytes() == b.final.joint().tobytes()


def test_seeds_change_stochastic_runs(quad):
    a = run(quad, SolverConfig(epochs=3, seed=0))
    b = run(quad, SolverConfig(epochs=3, seed=1))
    assert a.final_dist_sq != b.final_dist_sq


def test_afb_without_extrapolation_is_fb(quad):
    fb = run(quad, SolverConfig(method="fb", gamma=0.03, epochs=20))
    afb = run(quad, SolverConfig(method="afb", gamma=0.03, theta=0.0, epochs=20))
    assert fb.final.joint().tobytes() == afb.final.joint().tobytes()
    assert [r.dist_sq for r in fb.rows] == [r.dist_sq for r in afb.rows]


def test_fb_decouples_on_separable_problem():
    # z <- z - gamma z: the error shrinks by (1 - gamma)^2 per iteration
    res = run(separable_demo(), SolverConfig(method="fb", gamma=0.25, epochs=5), start=[2.0, -2.0])
    np.testing.assert_allclose([r.dist_sq for r in res.rows], [8.0 * 0.5625**k for k in range(6)],
                               rtol=1e-14)


def test_sfb_error_decays_like_one_over_k():
    prob = random_quadratic(20, 1, 1, 1.0, 3.0, rng=0, sym_fraction=1.0)
    curves = [run(prob, SolverConfig(method="sfb", gamma=2.0, epochs=2000, seed=s, trace_every=20))
              for s in range(20)]
    d = np.mean([c.metric("dist_sq") for c in curves], axis=0)
    it = np.array([r.iter for r in curves[0].rows], dtype=float)
    keep = it >= 2000
    slope = np.polyfit(np.log(it[keep]), np.log(d[keep]), 1)[0]
    assert -1.2 <= slope <= -0.7


def test_catalyst_without_regularization_is_restarted_svrg(quad):
    n = quad.n
    cat = run(quad, SolverConfig(method="svrg_catalyst", gamma=0.02, tau=0.0, m=2 * n,
                                 inner_epochs=3, epochs=12, seed=4))
    svrg = run(quad, SolverConfig(method="svrg", gamma=0.02, m=2 * n, epochs=12, seed=4))
    assert [r.as_tuple()[:3] for r in cat.rows] == [r.as_tuple()[:3] for r in svrg.rows]


def test_catalyst_defaults(quad):
    c = quad.constants
    assert default_tau(quad) == pytest.approx(c.lip / math.sqrt(c.n) - c.mu)
    res = run(quad, SolverConfig(method="saga_catalyst", gamma=0.02, epochs=10))
    assert res.extras["tau"] == default_tau(quad)
    assert res.extras["outer_iterations"] >= 1
    assert res.final_dist_sq < res.rows[0].dist_sq


def test_catalyst_rejects_other_methods(quad):
    from saddle_vr.solvers import catalyst_run

    with pytest.raises(ValueError):
        catalyst_run(quad, SolverConfig(method="svrg", gamma=0.1))


@pytest.mark.parametrize("method", ["saga", "svrg", "fb", "afb", "sfb", "svrg_catalyst"])
def test_oversized_step_reports_divergence(quad, method):
    res = run(quad, SolverConfig(method=method, gamma=50.0, epochs=200))
    assert res.diverged
    assert res.message
    assert score(res) == (2, math.inf, math.inf)


def test_target_stops_run(quad):
    res = run(quad, SolverConfig(epochs=500, target=1e-8))
    assert res.status == "converged"
    assert res.final_dist_sq <= 1e-8
    assert res.evals_to(1e-8) == res.rows[-1].grad_evals
    assert res.evals_to(1e-300) is None


def test_point_saga_auto_step_and_rate_extras(quad):
    res = run(quad, SolverConfig(epochs=1))
    rc = default_step_size(quad.constants)
    assert res.gamma == rc.gamma
    assert res.extras["alpha"] == rc.alpha


def test_point_saga_converges_linearly(quad):
    res = run(quad, SolverConfig(epochs=200, seed=2))
    assert res.final_dist_sq <= 1e-20 * max(res.rows[0].dist_sq, 1.0) or res.final_dist_sq < 1e-25
    assert res.status == "max_epochs"


def test_nonsmooth_run_uses_bound_step():
    prob = random_nonsmooth(10, 1, 1, mu=1.0, rng=0)
    start = np.array([1.0, -1.0])
    res = run(prob, SolverConfig(method="point_saga_nonsmooth", epochs=50, seed=1), start=start)
    B, R = measured_bounds(prob, start, prob.saddle_point())
    assert res.gamma == pytest.approx(R / (B * math.sqrt(10)))
    assert res.extras["bound"] == pytest.approx(nonsmooth_bound(10, 1.0, B, R))
    assert res.averaged is not None
    avg = res.averaged.joint()
    diff = avg - prob.saddle_point()
    assert res.rows[-1].dist_sq == pytest.approx(diff @ diff)
    with pytest.raises(ValueError):
        run(prob, SolverConfig(method="point_saga_nonsmooth"), oracle=False)


def test_nonsmooth_bound_example():
    assert nonsmooth_bound(4, 1.0, 1.0, 1.0) == 5.0
    assert nonsmooth_bound(1, 2.0, 3.0, 0.5) == pytest.approx(1.5 + 0.25)


def test_no_oracle_gives_nan_distances(quad):
    res = run(quad, SolverConfig(epochs=2), oracle=False)
    assert all(math.isnan(r.dist_sq) for r in res.rows)
    assert all(r.lyapunov is None for r in res.rows)


@pytest.mark.parametrize("bad", [
    dict(method="nope"), dict(gamma="fast"), dict(gamma=-1.0), dict(theta=1.0),
    dict(tau=-1.0), dict(m=0), dict(epochs=0), dict(seed=-1), dict(max_iter=-1),
    dict(trace_every=0), dict(target_metric="loss"), dict(inner_epochs=0),
    dict(divergence_factor=1.0), dict(bound_b=0.0),
])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        SolverConfig(**bad)


def test_config_round_trip():
    cfg = SolverConfig(method="svrg", gamma=0.1, m=7, seed=3)
    assert SolverConfig.from_dict({**cfg.to_dict(), "unknown": 1}) == cfg
    assert cfg.with_(seed=4).seed == 4


def test_score_orders_runs():
    def result(status, values, evals):
        rows = [TraceRow(iter=i, grad_evals=e, dist_sq=v) for i, (v, e) in enumerate(zip(values, evals))]
        return RunResult("saga", SolverConfig(), 0.1, rows, None, status=status)

    hit = result("converged", [1.0, 1e-7], [0, 50])
    miss = result("max_epochs", [1.0, 1e-3], [0, 50])
    bad = result("diverged", [1.0, 1e9], [0, 50])
    assert score(hit, target=1e-6) == (0, 50, 0.0)
    assert score(miss, target=1e-6) == (1, 1e-3, 0.0)
    assert sorted([bad, miss, hit], key=lambda r: score(r, target=1e-6)) == [hit, miss, bad]


def test_tune_picks_a_converging_step(quad):
    cfg = SolverConfig(method="svrg", epochs=60)
    tuned, results = tune(quad, cfg, target=1e-8)
    assert tuned.gamma in STEP_GRID
    assert ("gamma", tuned.gamma) in results
    assert not results[("gamma", tuned.gamma)].diverged
    # larger steps are tried first
    tried = [v for (f, v) in results if f == "gamma"]
    assert tried == sorted(tried, reverse=True)


def test_tune_catalyst_races_tau(quad):
    tuned, results = tune(quad, SolverConfig(method="svrg_catalyst", epochs=40), target=1e-8)
    assert any(f == "tau" for f, _ in results)
    assert ("tau", tuned.tau) in results


def test_tune_skips_nonsmooth():
    prob = random_nonsmooth(5, 1, 1, rng=0)
    cfg = SolverConfig(method="point_saga_nonsmooth")
    assert tune(prob, cfg) == (cfg, {})


def test_index_stream_is_uniform_and_seeded():
    a = index_stream(np.random.default_rng(5), 7)
    draws = [next(a) for _ in range(7000)]
    counts = np.bincount(draws, minlength=7)
    assert counts.min() > 850 and counts.max() < 1150
    b = index_stream(np.random.default_rng(5), 7)
    assert [next(b) for _ in range(100)] == draws[:100]
