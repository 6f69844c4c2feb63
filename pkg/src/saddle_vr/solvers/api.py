"""Method dispatch and step-size selection."""
from __future__ import annotations

import math

from ..core import default_step_size
from .config import STEP_GRID, TAU_GRID, RunResult, SolverConfig

_PILOT_EPOCHS = 2.0


def run(problem, config: SolverConfig, start=None, oracle=None) -> RunResult:
    """Run ``config.method`` on ``problem``.

    ``oracle`` is the saddle point used for ``dist_sq``; by default it is
    computed with the problem's exact solver, and ``oracle=False`` disables it.
    """
    from .catalyst import catalyst_run
    from .forward_backward import afb_run, fb_run, sfb_run
    from .point_saga import point_saga_nonsmooth_run, point_saga_run
    from .variance_reduced import saga_run, svrg_run

    runners = {
        "point_saga": point_saga_run,
        "saga": saga_run,
        "svrg": svrg_run,
        "svrg_catalyst": catalyst_run,
        "saga_catalyst": catalyst_run,
        "fb": fb_run,
        "afb": afb_run,
        "sfb": sfb_run,
        "point_saga_nonsmooth": point_saga_nonsmooth_run,
    }
    return runners[config.method](problem, config, start=start, oracle=oracle)


def score(result: RunResult, metric: str = "dist_sq", target=None) -> tuple:
    """Sort key for pilot runs: reached target first (fewest evals), then lowest final metric."""
    if result.diverged:
        return (2, math.inf, math.inf)
    if target is not None:
        hit = result.evals_to(target, metric)
        if hit is not None:
            return (0, hit, 0.0)
    values = [v for v in result.metric(metric) if v == v]
    final = values[-1] if values else math.inf
    return (1, final if math.isfinite(final) else math.inf, 0.0)


def select_step_size(problem, config: SolverConfig, grid=STEP_GRID, pilot_epochs=None,
                     start=None, oracle=None, metric=None, target=None):
    """Best step size of ``grid`` after a pilot run of each candidate.

    Returns ``(gamma, {gamma: RunResult})``.
    """
    epochs = pilot_epochs if pilot_epochs is not None else (
        config.pilot_epochs if config.pilot_epochs is not None else min(config.epochs, _PILOT_EPOCHS)
    )
    metric = metric or config.target_metric
    results = {}
    for g in grid:
        cfg = config.with_(gamma=float(g), epochs=epochs, target=target)
        results[float(g)] = run(problem, cfg, start=start, oracle=oracle)
    best = min(results, key=lambda g: score(results[g], metric, target))
    return best, results


def resolve_gamma(problem, config: SolverConfig, start=None, oracle=None) -> float:
    if config.gamma != "auto":
        return float(config.gamma)
    if config.method == "point_saga":
        return default_step_size(problem.constants).gamma
    if config.method == "point_saga_nonsmooth":
        raise ValueError("point_saga_nonsmooth resolves its step size from the bounds B and R")
    gamma, _ = select_step_size(problem, config, start=start, oracle=oracle)
    return gamma


#: divergence cut-off used by tuning runs; a run this far off never wins the race
TUNE_DIVERGENCE = 1e4


def _race(problem, config: SolverConfig, field: str, values, target, metric, start, oracle):
    """Try ``values`` for ``field`` in order, each capped at the best budget so far.

    The scan ends at the first value that does not improve on the incumbent
    once some run has avoided divergence.
    """
    n = problem.n
    results, best, best_key, best_evals = {}, None, None, None
    for v in values:
        epochs = config.epochs if best_evals is None else min(config.epochs, best_evals / n)
        cfg = config.with_(**{field: v}, epochs=epochs, target=target,
                           target_metric=metric, divergence_factor=TUNE_DIVERGENCE)
        res = run(problem, cfg, start=start, oracle=oracle)
        results[v] = res
        key = score(res, metric, target)
        if best_key is None or key < best_key:
            best, best_key = v, key
            if key[0] == 0:
                best_evals = key[1]
        elif best_key[0] < 2:
            break
    return best, results


def tune(problem, config: SolverConfig, grid=STEP_GRID, tau_grid=TAU_GRID,
         target=1e-6, metric=None, start=None, oracle=None):
    """Pick the step size (and catalyst strength) that reaches ``target`` soonest.

    Step sizes are raced from the largest down; catalyst strengths are then
    raced as ``gamma * t`` for ``t`` in ``tau_grid``, after the strength used
    while racing the step sizes. The averaged non-smooth
    variant keeps its bound-based step size. Returns ``(tuned_config, results)`` where
    ``results`` maps ``(field, value)`` to the tuning run.
    """
    metric = metric or config.target_metric
    if config.method == "point_saga_nonsmooth":
        return config, {}
    if oracle is None:
        from ._common import oracle_point

        oracle = oracle_point(problem, None)
    gamma, res = _race(problem, config, "gamma", sorted(map(float, grid), reverse=True),
                       target, metric, start, oracle)
    out = {("gamma", g): r for g, r in res.items()}
    tuned = config.with_(gamma=gamma)
    if config.method.endswith("_catalyst") and tau_grid:
        # the incumbent strength (None: the default) competes with the grid
        taus = [config.tau] + sorted(gamma * float(t) for t in tau_grid)
        tau, res = _race(problem, tuned, "tau", taus, target, metric, start, oracle)
        out.update({("tau", t): r for t, r in res.items()})
        tuned = tuned.with_(tau=tau)
    return tuned, out
