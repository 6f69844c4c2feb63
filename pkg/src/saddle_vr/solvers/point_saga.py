"""Point SAGA for finite-sum saddle problems, smooth and non-smooth."""
from __future__ import annotations

import math

import numpy as np

from ..core import GradientTable, default_step_size, rate_constants
from ._common import (
    as_point, eval_budget, make_rng, oracle_point, start_point, stochastic_every,
)
from ._tracking import Tracker, index_stream
from .config import RunResult, SolverConfig


def point_saga_steps(problem, z, table, gamma, stream, tracker, it, evals, max_evals,
                     max_iter=None, average=None):
    """Run Point SAGA iterations in place until the eval budget is spent.

    Each iteration draws ``j``, forms ``p = z + gamma (g_j^stored - mean)``,
    sets ``z = prox_j(p)`` and stores the operator value recovered from the
    prox displacement, ``(p - z) / gamma``. No fresh gradient is evaluated.
    When ``average`` is given it holds the running mean of the iterates and
    the trace reports that mean instead of the last iterate.
    """
    prox = problem.prox
    entries = table.entries
    inv_gamma = 1.0 / gamma
    if max_iter is None:
        max_iter = float("inf")
    # the budget is checked before drawing so a shared stream loses no index
    while evals < max_evals and it < max_iter:
        j = next(stream, None)
        if j is None:
            break
        p = z + gamma * (entries[j] - table.mean)
        z = prox(j, gamma, p)
        table.replace(j, (p - z) * inv_gamma)
        it += 1
        evals += 1
        if average is not None:
            average += (z - average) / it
        if it % tracker.every == 0 and tracker.record(it, evals, z, table, average):
            return z, it, evals, True
    return z, it, evals, False


def point_saga_run(problem, config: SolverConfig, start=None, oracle=None) -> RunResult:
    """Point SAGA with step ``config.gamma`` (``"auto"``: the analysis step size)."""
    config = config if config.method == "point_saga" else config.with_(method="point_saga")
    consts = problem.constants
    gamma = default_step_size(consts).gamma if config.gamma == "auto" else float(config.gamma)
    z = start_point(problem, start)
    z_star = oracle_point(problem, oracle)
    g_star = problem.saddle_operator_values(z_star) if z_star is not None else None
    rate = rate_constants(consts, gamma)
    tracker = Tracker(problem, config, z_star, g_star, rate.c, stochastic_every(problem, config))
    n = problem.n
    with np.errstate(all="ignore"):
        table = GradientTable(problem.all_grads(z), d_x=problem.d_x)
        evals = n
        stop = tracker.record(0, evals, z, table)
        it = 0
        if not stop:
            z, it, evals, stop = point_saga_steps(
                problem, z, table, gamma, index_stream(make_rng(config), n),
                tracker, 0, evals, eval_budget(problem, config), config.max_iter,
            )
        tracker.finish(it, evals, z, table)
    return RunResult(
        method="point_saga", config=config, gamma=gamma, rows=tracker.rows,
        final=as_point(problem, z), status=tracker.status, message=tracker.message,
        extras={"alpha": rate.alpha, "c": rate.c, "table": table},
    )


def measured_bounds(problem, z0, z_star):
    """``B = max_i |g_i(z0) - g_i(z*)|`` and ``R = |z0 - z*|``."""
    g0 = problem.all_grads(z0)
    g_star = problem.saddle_operator_values(z_star)
    B = float(np.sqrt(((g0 - g_star) ** 2).sum(axis=1)).max())
    R = float(np.linalg.norm(z0 - z_star))
    return B, R


def nonsmooth_bound(n: int, mu: float, B: float, R: float) -> float:
    """Right-hand side ``2 sqrt(n) B R / mu + R^2`` of the averaged-iterate bound (times 1/K)."""
    return 2.0 * math.sqrt(n) * B * R / mu + R * R


def point_saga_nonsmooth_run(problem, config: SolverConfig, start=None, oracle=None) -> RunResult:
    """Point SAGA with subgradients and iterate averaging.

    The step is ``R / (B sqrt(n))`` unless ``config.gamma`` is given; ``B`` and
    ``R`` come from the config or are measured at the start point against the
    saddle oracle. Trace rows and ``result.averaged`` report the running mean
    of the iterates ``z^1..z^K``.
    """
    config = config if config.method == "point_saga_nonsmooth" else config.with_(method="point_saga_nonsmooth")
    n = problem.n
    z = start_point(problem, start)
    z_star = oracle_point(problem, oracle)
    B, R = config.bound_b, config.bound_r
    if (B is None or R is None) and z_star is not None:
        mB, mR = measured_bounds(problem, z, z_star)
        B = mB if B is None else B
        R = mR if R is None else R
    if config.gamma == "auto":
        if B is None or R is None:
            raise ValueError("gamma='auto' needs bound_b and bound_r or a saddle oracle")
        if not (B > 0 and R > 0):
            raise ValueError(f"bounds must be positive, got B={B}, R={R}")
        gamma = R / (B * math.sqrt(n))
    else:
        gamma = float(config.gamma)
    tracker = Tracker(problem, config, z_star, None, None, stochastic_every(problem, config))
    average = np.zeros_like(z)
    with np.errstate(all="ignore"):
        table = GradientTable(problem.all_grads(z), d_x=problem.d_x)
        evals = n
        it = 0
        z, it, evals, _ = point_saga_steps(
            problem, z, table, gamma, index_stream(make_rng(config), n),
            tracker, 0, evals, eval_budget(problem, config), config.max_iter, average=average,
        )
        tracker.finish(it, evals, z, table, average)
    extras = {"bound_b": B, "bound_r": R, "iterations": it}
    if B is not None and R is not None:
        extras["bound"] = nonsmooth_bound(n, problem.constants.mu, B, R)
    return RunResult(
        method="point_saga_nonsmooth", config=config, gamma=gamma, rows=tracker.rows,
        final=as_point(problem, z), status=tracker.status, message=tracker.message,
        averaged=as_point(problem, average), extras=extras,
    )
