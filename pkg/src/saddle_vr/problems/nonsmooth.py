"""Separable non-smooth saddle family with a closed-form prox.

    f_i(x, y) = mu/2 |x|^2 + s_i |x|_1 + c_i'x - mu/2 |y|^2 - t_i |y|_1 - d_i'y

The operator uses the subgradient selection ``sign(0) = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import ProblemConstants
from .base import SaddleProblem


def soft_threshold(a, tau):
    return np.sign(a) * np.maximum(np.abs(a) - tau, 0.0)


@dataclass(frozen=True)
class NonsmoothSeparableSpec:
    mu: float
    s: np.ndarray  # (n,) l1 weights on x
    t: np.ndarray  # (n,) l1 weights on y
    c: np.ndarray  # (n, d_x)
    d: np.ndarray  # (n, d_y)

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.s, dtype=float))
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        c = np.array(self.c, dtype=float, ndmin=2)
        d = np.array(self.d, dtype=float, ndmin=2)
        n = s.shape[0]
        if t.shape != (n,) or c.shape[0] != n or d.shape[0] != n:
            raise ValueError("s, t, c, d must agree on the number of components")
        if np.any(s < 0) or np.any(t < 0):
            raise ValueError("l1 weights must be non-negative")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        for name, arr in (("s", s), ("t", t), ("c", c), ("d", d)):
            object.__setattr__(self, name, arr)


class NonsmoothSeparable(SaddleProblem):
    """Problem built from a :class:`NonsmoothSeparableSpec`.

    There is no Lipschitz constant; ``constants.lip`` is set to ``mu`` only to
    satisfy :class:`ProblemConstants` and is never used for step sizes.
    """

    smooth = False

    def __init__(self, spec: NonsmoothSeparableSpec):
        self.spec = spec
        self.d_x, self.d_y = spec.c.shape[1], spec.d.shape[1]
        self.constants = ProblemConstants(n=spec.s.shape[0], mu=spec.mu, lip=spec.mu)

    def grad(self, i, z):
        sp = self.spec
        x, y = z[: self.d_x], z[self.d_x :]
        return np.concatenate([
            sp.mu * x + sp.s[i] * np.sign(x) + sp.c[i],
            sp.mu * y + sp.t[i] * np.sign(y) + sp.d[i],
        ])

    def prox_split(self, i, gamma_x, gamma_y, z):
        sp = self.spec
        p, q = z[: self.d_x], z[self.d_x :]
        u = soft_threshold(p - gamma_x * sp.c[i], gamma_x * sp.s[i]) / (1.0 + gamma_x * sp.mu)
        v = soft_threshold(q - gamma_y * sp.d[i], gamma_y * sp.t[i]) / (1.0 + gamma_y * sp.mu)
        return np.concatenate([u, v])

    def value(self, i, z):
        sp = self.spec
        x, y = z[: self.d_x], z[self.d_x :]
        return float(
            0.5 * sp.mu * x @ x + sp.s[i] * np.abs(x).sum() + sp.c[i] @ x
            - 0.5 * sp.mu * y @ y - sp.t[i] * np.abs(y).sum() - sp.d[i] @ y
        )

    def saddle_point(self):
        sp = self.spec
        x = soft_threshold(-sp.c.mean(axis=0), sp.s.mean()) / sp.mu
        y = soft_threshold(-sp.d.mean(axis=0), sp.t.mean()) / sp.mu
        return np.concatenate([x, y])

    def saddle_operator_values(self, z_star):
        """Subgradients at the saddle whose average is exactly zero.

        Where a saddle coordinate is zero each component uses the same element
        ``xi`` of ``d|.|(0)``, chosen so the mean subgradient vanishes.
        """
        sp = self.spec
        x, y = z_star[: self.d_x], z_star[self.d_x :]
        s_bar, t_bar = sp.s.mean(), sp.t.mean()
        c_bar, d_bar = sp.c.mean(axis=0), sp.d.mean(axis=0)
        xi_x = np.where(x != 0, np.sign(x), -c_bar / s_bar if s_bar > 0 else 0.0)
        xi_y = np.where(y != 0, np.sign(y), -d_bar / t_bar if t_bar > 0 else 0.0)
        gx = sp.mu * x[None, :] + sp.s[:, None] * xi_x[None, :] + sp.c
        gy = sp.mu * y[None, :] + sp.t[:, None] * xi_y[None, :] + sp.d
        return np.concatenate([gx, gy], axis=1)


def random_nonsmooth(n, d_x, d_y, mu=1.0, rng=None, l1_scale=1.0, offset_scale=1.0):
    rng = np.random.default_rng(rng)
    spec = NonsmoothSeparableSpec(
        mu=mu,
        s=l1_scale * rng.uniform(0.0, 1.0, n),
        t=l1_scale * rng.uniform(0.0, 1.0, n),
        c=offset_scale * rng.standard_normal((n, d_x)),
        d=offset_scale * rng.standard_normal((n, d_y)),
    )
    return NonsmoothSeparable(spec)


def nonsmooth_prox(spec: NonsmoothSeparableSpec, i: int, gamma: float, point):
    return NonsmoothSeparable(spec).prox_component(i, gamma, point)
