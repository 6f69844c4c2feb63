"""SAGA and SVRG forward steps with variance-reduced operator estimates."""
from __future__ import annotations

import numpy as np

from ..core import GradientTable
from ._common import as_point, eval_budget, make_rng, oracle_point, start_point, stochastic_every
from ._tracking import Tracker, index_stream
from .config import RunResult, SolverConfig


def saga_steps(problem, z, gamma, stream, tracker, it, evals, max_evals, max_iter=None):
    """Build a table at ``z`` (``n`` evals) and iterate SAGA until the budget is spent.

    Nothing is evaluated when the budget cannot cover the table and one step.
    """
    n = problem.n
    grad = problem.grad
    if evals + n >= max_evals:
        return z, it, evals, False
    table = GradientTable(problem.all_grads(z), d_x=problem.d_x)
    evals += n
    entries = table.entries
    if max_iter is None:
        max_iter = float("inf")
    inv_n = 1.0 / n
    # the table mean is updated inline; GradientTable.replace semantics, minus call overhead
    mean = table.mean
    since = 0
    while evals < max_evals and it < max_iter:
        j = next(stream, None)
        if j is None:
            break
        g = grad(j, z)
        delta = g - entries[j]
        z = z - gamma * (delta + mean)
        entries[j] = g
        since += 1
        if since >= n:
            mean = entries.mean(axis=0)
            since = 0
        else:
            mean = mean + delta * inv_n
        it += 1
        evals += 1
        if it % tracker.every == 0 and tracker.record(it, evals, z):
            return z, it, evals, True
    return z, it, evals, False


def svrg_steps(problem, z, gamma, m, stream, tracker, it, evals, max_evals, max_iter=None):
    """SVRG with a fresh snapshot (``n`` evals) every ``m`` inner iterations.

    Component values at the snapshot are kept, so every inner iteration costs
    a single component evaluation. A snapshot is only taken when the budget
    leaves room for at least one step after it.
    """
    grad = problem.grad
    n = problem.n
    if max_iter is None:
        max_iter = float("inf")
    inner = m
    snap = snap_mean = None
    while evals < max_evals and it < max_iter:
        if inner >= m:
            if evals + n >= max_evals:
                break
            snap = problem.all_grads(z)
            snap_mean = snap.mean(axis=0)
            evals += n
            inner = 0
        j = next(stream, None)
        if j is None:
            break
        g = grad(j, z)
        z = z - gamma * (g - snap[j] + snap_mean)
        inner += 1
        it += 1
        evals += 1
        if it % tracker.every == 0 and tracker.record(it, evals, z):
            return z, it, evals, True
    return z, it, evals, False


def _run(method, steps, problem, config: SolverConfig, gamma, start, oracle, **kw) -> RunResult:
    z = start_point(problem, start)
    z_star = oracle_point(problem, oracle)
    tracker = Tracker(problem, config, z_star, every=stochastic_every(problem, config))
    it, evals = 0, 0
    with np.errstate(all="ignore"):
        stop = tracker.record(0, evals, z)
        if not stop:
            z, it, evals, stop = steps(
                problem, z, gamma, stream=index_stream(make_rng(config), problem.n),
                tracker=tracker, it=0, evals=0, max_evals=eval_budget(problem, config),
                max_iter=config.max_iter, **kw,
            )
        tracker.finish(it, evals, z)
    return RunResult(
        method=method, config=config, gamma=gamma, rows=tracker.rows,
        final=as_point(problem, z), status=tracker.status, message=tracker.message,
    )


def saga_run(problem, config: SolverConfig, start=None, oracle=None) -> RunResult:
    from .api import resolve_gamma

    config = config if config.method == "saga" else config.with_(method="saga")
    gamma = resolve_gamma(problem, config, start=start, oracle=oracle)
    return _run("saga", saga_steps, problem, config, gamma, start, oracle)


def svrg_run(problem, config: SolverConfig, start=None, oracle=None) -> RunResult:
    """SVRG; the snapshot interval ``m`` defaults to ``2n``."""
    from .api import resolve_gamma

    config = config if config.method == "svrg" else config.with_(method="svrg")
    gamma = resolve_gamma(problem, config, start=start, oracle=oracle)
    m = config.m if config.m is not None else 2 * problem.n
    return _run("svrg", svrg_steps, problem, config, gamma, start, oracle, m=m)
