"""Catalyst outer loop around SVRG or SAGA."""
from __future__ import annotations

import math

import numpy as np

from ..problems.base import SaddleProblem
from ._common import as_point, eval_budget, make_rng, oracle_point, start_point, stochastic_every
from ._tracking import Tracker, index_stream
from .config import RunResult, SolverConfig
from .variance_reduced import saga_steps, svrg_steps


class RegularizedProblem(SaddleProblem):
    """``f_i + tau/2 |x - x_bar|^2 - tau/2 |y - y_bar|^2`` around an anchor.

    The added term contributes ``tau (z - anchor)`` to every component operator.
    """

    def __init__(self, base: SaddleProblem, tau: float, anchor):
        self.base = base
        self.tau = float(tau)
        self.anchor = np.array(anchor, dtype=float)
        self.d_x, self.d_y = base.d_x, base.d_y
        self.constants = type(base.constants)(
            n=base.n, mu=base.constants.mu + tau, lip=base.constants.lip + tau
        )

    def grad(self, i, z):
        return self.base.grad(i, z) + self.tau * (z - self.anchor)

    def all_grads(self, z):
        return self.base.all_grads(z) + self.tau * (z - self.anchor)

    def mean_grad(self, z):
        return self.base.mean_grad(z) + self.tau * (z - self.anchor)

    def prox_split(self, i, gamma_x, gamma_y, z):
        # fold the quadratic into the prox: 1/g' = tau + 1/g, centre g'(p/g + tau a)
        gx = 1.0 / (self.tau + 1.0 / gamma_x)
        gy = 1.0 / (self.tau + 1.0 / gamma_y)
        dx = self.d_x
        centre = np.concatenate([
            gx * (z[:dx] / gamma_x + self.tau * self.anchor[:dx]),
            gy * (z[dx:] / gamma_y + self.tau * self.anchor[dx:]),
        ])
        return self.base.prox_split(i, gx, gy, centre)

    def value(self, i, z):
        d = z - self.anchor
        dx = self.d_x
        return self.base.value(i, z) + 0.5 * self.tau * (d[:dx] @ d[:dx] - d[dx:] @ d[dx:])

    def saddle_point(self):
        raise NotImplementedError("regularized subproblems are solved approximately")


def default_tau(problem) -> float:
    """Strength that brings the subproblem condition number near ``sqrt(n)``."""
    c = problem.constants
    return max(c.lip / math.sqrt(c.n) - c.mu, 0.0)


def catalyst_run(problem, config: SolverConfig, start=None, oracle=None) -> RunResult:
    """Proximal-point outer loop with an inexact inner solver.

    Each outer iteration runs ``config.inner_epochs`` epochs of the inner
    method (SVRG for ``svrg_catalyst``, SAGA for ``saga_catalyst``) on the
    problem regularized around the current anchor, warm-started at the last
    iterate, and then moves the anchor to the inner result. Trace rows
    measure the original problem and count every inner oracle call.
    """
    from .api import resolve_gamma

    if config.method not in ("svrg_catalyst", "saga_catalyst"):
        raise ValueError(f"catalyst needs method svrg_catalyst or saga_catalyst, got {config.method!r}")
    inner_method = config.method.split("_")[0]
    tau = default_tau(problem) if config.tau is None else float(config.tau)
    gamma = resolve_gamma(problem, config, start=start, oracle=oracle)
    z = start_point(problem, start)
    z_star = oracle_point(problem, oracle)
    tracker = Tracker(problem, config, z_star, every=stochastic_every(problem, config))
    n = problem.n
    max_evals = eval_budget(problem, config)
    inner_budget = max(1, int(math.ceil(config.inner_epochs * n)))
    m = config.m if config.m is not None else 2 * n
    stream = index_stream(make_rng(config), n)
    it, evals, outer = 0, 0, 0
    with np.errstate(all="ignore"):
        stop = tracker.record(0, evals, z)
        while not stop and evals < max_evals:
            sub = RegularizedProblem(problem, tau, z)
            limit = min(max_evals, evals + inner_budget)
            spent = evals
            if inner_method == "svrg":
                z, it, evals, stop = svrg_steps(sub, z, gamma, m, stream, tracker, it, evals, limit, config.max_iter)
            else:
                z, it, evals, stop = saga_steps(sub, z, gamma, stream, tracker, it, evals, limit, config.max_iter)
            if evals == spent:
                # the remaining budget cannot pay for another table or snapshot
                break
            outer += 1
            if config.max_iter is not None and it >= config.max_iter:
                break
        tracker.finish(it, evals, z)
    return RunResult(
        method=config.method, config=config, gamma=gamma, rows=tracker.rows,
        final=as_point(problem, z), status=tracker.status, message=tracker.message,
        extras={"tau": tau, "outer_iterations": outer},
    )
