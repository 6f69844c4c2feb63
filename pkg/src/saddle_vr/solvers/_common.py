from __future__ import annotations

import math

import numpy as np

from ..core import PrimalDualPoint, _joint_of
from ..problems.base import UnsupportedProblem


def start_point(problem, start) -> np.ndarray:
    if start is None:
        return np.zeros(problem.dim)
    return _joint_of(problem, start).astype(float, copy=True)


def oracle_point(problem, oracle):
    """Joint saddle point, or None when no oracle is available."""
    if oracle is None:
        try:
            return problem.saddle_point()
        except UnsupportedProblem:
            return None
    if oracle is False:
        return None
    return _joint_of(problem, oracle).astype(float, copy=True)


def eval_budget(problem, config) -> int:
    return max(1, int(math.ceil(config.epochs * problem.n)))


def stochastic_every(problem, config) -> int:
    return config.trace_every if config.trace_every is not None else problem.n


def make_rng(config) -> np.random.Generator:
    return np.random.default_rng(int(config.seed))


def as_point(problem, z) -> PrimalDualPoint:
    return PrimalDualPoint.from_joint(z, problem.d_x)
