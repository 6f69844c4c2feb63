"""Change of variables that equalises the convexity and concavity moduli."""
from __future__ import annotations

import math

import numpy as np

from ..core import ProblemConstants
from .base import SaddleProblem


class ScaledProblem(SaddleProblem):
    """``f~_i(x~, y~) = f_i(x~ / sqrt(mu_x), y~ / sqrt(mu_y))``.

    If ``f_i`` is ``mu_x``-strongly convex in ``x`` and ``mu_y``-strongly
    concave in ``y`` then ``f~_i`` is 1-strongly convex-concave. Gradients and
    proxes delegate to the base problem; a prox with step ``gamma`` on the
    scaled problem is a base prox with steps ``gamma / mu_x`` and
    ``gamma / mu_y`` on the two blocks.
    """

    def __init__(self, base: SaddleProblem, mu_x: float, mu_y: float, lip: float | None = None):
        if not mu_x > 0 or not mu_y > 0:
            raise ValueError(f"mu_x and mu_y must be positive, got {mu_x}, {mu_y}")
        self.base = base
        self.mu_x, self.mu_y = float(mu_x), float(mu_y)
        self.d_x, self.d_y = base.d_x, base.d_y
        self.smooth = base.smooth
        self._s = np.concatenate([
            np.full(base.d_x, math.sqrt(mu_x)), np.full(base.d_y, math.sqrt(mu_y))
        ])
        if lip is None:
            lip = base.operator_norm(mu_x, mu_y)
        self.constants = ProblemConstants(n=base.n, mu=1.0, lip=max(float(lip), 1.0))

    def to_base(self, z_scaled):
        return np.asarray(z_scaled) / self._s

    def from_base(self, z):
        return np.asarray(z) * self._s

    def grad(self, i, z):
        return self.base.grad(i, z / self._s) / self._s

    def all_grads(self, z):
        return self.base.all_grads(z / self._s) / self._s

    def mean_grad(self, z):
        return self.base.mean_grad(z / self._s) / self._s

    def prox_split(self, i, gamma_x, gamma_y, z):
        u = self.base.prox_split(i, gamma_x / self.mu_x, gamma_y / self.mu_y, z / self._s)
        return u * self._s

    def value(self, i, z):
        return self.base.value(i, z / self._s)

    def primal_loss(self, x):
        return self.base.primal_loss(np.asarray(x) / self._s[: self.d_x])

    def saddle_point(self):
        return self.from_base(self.base.saddle_point())

    def saddle_operator_values(self, z_star):
        return self.base.saddle_operator_values(self.to_base(z_star)) / self._s

    def operator_norm(self, scale_x=1.0, scale_y=1.0):
        return self.base.operator_norm(self.mu_x * scale_x, self.mu_y * scale_y)


def scale_problem(problem: SaddleProblem, mu_x: float, mu_y: float, lip: float | None = None) -> ScaledProblem:
    return ScaledProblem(problem, mu_x, mu_y, lip=lip)
