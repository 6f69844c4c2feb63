"""Batch, accelerated and stochastic forward-backward iterations."""
from __future__ import annotations

import numpy as np

from ._common import as_point, eval_budget, make_rng, oracle_point, start_point, stochastic_every
from ._tracking import Tracker, index_stream
from .config import RunResult, SolverConfig


def _batch(problem, config: SolverConfig, gamma, theta, start, oracle, method) -> RunResult:
    z = start_point(problem, start)
    z_star = oracle_point(problem, oracle)
    every = config.trace_every if config.trace_every is not None else 1
    tracker = Tracker(problem, config, z_star, every=every)
    n = problem.n
    max_evals = eval_budget(problem, config)
    max_iter = config.max_iter if config.max_iter is not None else float("inf")
    mean_grad = problem.mean_grad
    z_prev = z
    it, evals = 0, 0
    with np.errstate(all="ignore"):
        stop = tracker.record(0, evals, z)
        while not stop and evals + n <= max_evals and it < max_iter:
            if theta:
                w = z + theta * (z - z_prev)
            else:
                w = z
            z_prev, z = z, z - gamma * mean_grad(w)
            it += 1
            evals += n
            stop = it % every == 0 and tracker.record(it, evals, z)
        tracker.finish(it, evals, z)
    return RunResult(
        method=method, config=config, gamma=gamma, rows=tracker.rows,
        final=as_point(problem, z), status=tracker.status, message=tracker.message,
    )


def fb_run(problem, config: SolverConfig, start=None, oracle=None) -> RunResult:
    """``z <- z - gamma * mean_i g_i(z)``; every iteration costs ``n`` evals."""
    from .api import resolve_gamma

    config = config if config.method == "fb" else config.with_(method="fb")
    gamma = resolve_gamma(problem, config, start=start, oracle=oracle)
    return _batch(problem, config, gamma, 0.0, start, oracle, "fb")


def afb_run(problem, config: SolverConfig, start=None, oracle=None) -> RunResult:
    """Forward-backward with the operator evaluated at ``z + theta (z - z_prev)``."""
    from .api import resolve_gamma

    config = config if config.method == "afb" else config.with_(method="afb")
    gamma = resolve_gamma(problem, config, start=start, oracle=oracle)
    return _batch(problem, config, gamma, config.theta, start, oracle, "afb")


def sfb_run(problem, config: SolverConfig, start=None, oracle=None) -> RunResult:
    """Single-component steps with decaying size ``gamma_k = gamma_0 / (1 + mu k)``."""
    from .api import resolve_gamma

    config = config if config.method == "sfb" else config.with_(method="sfb")
    gamma0 = resolve_gamma(problem, config, start=start, oracle=oracle)
    mu = problem.constants.mu
    z = start_point(problem, start)
    z_star = oracle_point(problem, oracle)
    tracker = Tracker(problem, config, z_star, every=stochastic_every(problem, config))
    max_evals = eval_budget(problem, config)
    max_iter = config.max_iter if config.max_iter is not None else float("inf")
    grad = problem.grad
    it, evals = 0, 0
    with np.errstate(all="ignore"):
        stop = tracker.record(0, evals, z)
        if not stop:
            stream = index_stream(make_rng(config), problem.n)
            while evals < max_evals and it < max_iter:
                j = next(stream)
                z = z - (gamma0 / (1.0 + mu * it)) * grad(j, z)
                it += 1
                evals += 1
                if it % tracker.every == 0 and tracker.record(it, evals, z):
                    break
        tracker.finish(it, evals, z)
    return RunResult(
        method="sfb", config=config, gamma=gamma0, rows=tracker.rows,
        final=as_point(problem, z), status=tracker.status, message=tracker.message,
    )
