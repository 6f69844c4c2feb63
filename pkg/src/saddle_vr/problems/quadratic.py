"""Smooth quadratic saddle family.

``f_i(x, y) = 1/2 x'P_i x + a_i'x + y'M_i x - 1/2 y'Q_i y - b_i'y`` with
``P_i, Q_i`` symmetric positive definite. The operator is affine,
``g_i(z) = J_i z + h_i`` with ``J_i = [[P_i, M_i'], [-M_i, Q_i]]`` and
``h_i = [a_i; b_i]``, so gradient, prox and saddle are all linear algebra.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ..core import ProblemConstants
from .base import SaddleProblem

_PROX_CACHE_SIZE = 16


@dataclass(frozen=True)
class QuadraticSaddleSpec:
    P: np.ndarray  # (n, d_x, d_x)
    Q: np.ndarray  # (n, d_y, d_y)
    M: np.ndarray  # (n, d_y, d_x)
    a: np.ndarray  # (n, d_x)
    b: np.ndarray  # (n, d_y)

    def __post_init__(self):
        P = np.array(self.P, dtype=float, ndmin=3)
        Q = np.array(self.Q, dtype=float, ndmin=3)
        M = np.array(self.M, dtype=float, ndmin=3)
        a = np.array(self.a, dtype=float, ndmin=2)
        b = np.array(self.b, dtype=float, ndmin=2)
        n, d_x = P.shape[0], P.shape[1]
        d_y = Q.shape[1]
        expected = {
            "P": (n, d_x, d_x), "Q": (n, d_y, d_y), "M": (n, d_y, d_x),
            "a": (n, d_x), "b": (n, d_y),
        }
        for name, arr in zip("PQMab", (P, Q, M, a, b)):
            if arr.shape != expected[name]:
                raise ValueError(f"{name} has shape {arr.shape}, expected {expected[name]}")
        for name, arr in (("P", P), ("Q", Q)):
            if not np.allclose(arr, np.swapaxes(arr, 1, 2), rtol=0, atol=1e-12 * (1 + np.abs(arr).max())):
                raise ValueError(f"{name}_i must be symmetric")
        for name, arr in zip("PQMab", (P, Q, M, a, b)):
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def d_x(self) -> int:
        return self.P.shape[1]

    @property
    def d_y(self) -> int:
        return self.Q.shape[1]


class QuadraticSaddle(SaddleProblem):
    """Quadratic saddle problem built from a :class:`QuadraticSaddleSpec`.

    ``mu`` defaults to the smallest eigenvalue over all ``P_i`` and ``Q_i``
    and ``lip`` to the largest spectral norm over all ``J_i``; both are
    computed exactly (up to rounding) rather than estimated.
    """

    def __init__(self, spec: QuadraticSaddleSpec, mu: float | None = None, lip: float | None = None):
        self.spec = spec
        self.d_x, self.d_y = spec.d_x, spec.d_y
        n, dx = spec.n, spec.d_x
        D = self.d_x + self.d_y
        J = np.zeros((n, D, D))
        J[:, :dx, :dx] = spec.P
        J[:, :dx, dx:] = np.swapaxes(spec.M, 1, 2)
        J[:, dx:, :dx] = -spec.M
        J[:, dx:, dx:] = spec.Q
        self.J = J
        self.h = np.concatenate([spec.a, spec.b], axis=1)
        self.J_mean = J.mean(axis=0)
        self.h_mean = self.h.mean(axis=0)
        if mu is None:
            mu = min(np.linalg.eigvalsh(spec.P).min(), np.linalg.eigvalsh(spec.Q).min())
        if lip is None:
            lip = self.operator_norm()
        self.constants = ProblemConstants(n=n, mu=float(mu), lip=float(max(lip, mu)))
        self._prox_cache: OrderedDict = OrderedDict()

    def grad(self, i, z):
        return self.J[i] @ z + self.h[i]

    def all_grads(self, z):
        return self.J @ z + self.h

    def mean_grad(self, z):
        return self.J_mean @ z + self.h_mean

    def jacobian(self, i: int) -> np.ndarray:
        return self.J[i]

    def _resolvents(self, gamma_x: float, gamma_y: float):
        key = (gamma_x, gamma_y)
        entry = self._prox_cache.get(key)
        if entry is None:
            steps = np.concatenate([np.full(self.d_x, gamma_x), np.full(self.d_y, gamma_y)])
            inv = np.linalg.inv(np.eye(self.dim) + steps[None, :, None] * self.J)
            SJ = steps[None, :, None] * self.J
            entry = (inv, SJ, steps * self.h)
            self._prox_cache[key] = entry
            if len(self._prox_cache) > _PROX_CACHE_SIZE:
                self._prox_cache.popitem(last=False)
        return entry

    def prox_split(self, i, gamma_x, gamma_y, z):
        # (I + G J_i) u = z - G h_i with G = diag(gamma_x I, gamma_y I)
        inv, SJ, Gh = self._resolvents(gamma_x, gamma_y)
        rhs = z - Gh[i]
        u = inv[i] @ rhs
        # one refinement step keeps the stationarity residual at round-off level
        return u + inv[i] @ (rhs - u - SJ[i] @ u)

    def value(self, i, z):
        s = self.spec
        x, y = z[: self.d_x], z[self.d_x :]
        return float(
            0.5 * x @ s.P[i] @ x + s.a[i] @ x + y @ s.M[i] @ x - 0.5 * y @ s.Q[i] @ y - s.b[i] @ y
        )

    def saddle_point(self):
        return np.linalg.solve(self.J_mean, -self.h_mean)

    def operator_norm(self, scale_x=1.0, scale_y=1.0):
        inv_s = np.concatenate([np.full(self.d_x, scale_x ** -0.5), np.full(self.d_y, scale_y ** -0.5)])
        scaled = inv_s[None, :, None] * self.J * inv_s[None, None, :]
        return float(np.linalg.svd(scaled, compute_uv=False)[:, 0].max())


def _random_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _spd_with_spectrum(rng, d, lo, hi):
    eig = rng.uniform(lo, hi, size=d)
    eig[0] = lo
    U = _random_orthogonal(rng, d)
    S = (U * eig) @ U.T
    return 0.5 * (S + S.T)


def random_quadratic(
    n: int,
    d_x: int,
    d_y: int,
    mu: float,
    kappa: float,
    rng: np.random.Generator | int | None = None,
    sym_fraction: float = 0.0,
    offset_scale: float = 1.0,
) -> QuadraticSaddle:
    """Random instance with modulus exactly ``mu`` and Lipschitz constant ``kappa * mu``.

    The eigenvalues of every ``P_i`` and ``Q_i`` lie in ``[mu, sym_max]`` with
    the lower end attained, where ``sym_max = mu + sym_fraction * (kappa - 1) * mu``.
    Random couplings ``M_i`` are then scaled by a common factor found by
    bisection so that ``max_i ||J_i|| = kappa * mu``. ``sym_fraction = 0``
    gives a coupling-dominated (bilinear) instance.

    The saddle is a random unit vector and ``g_i`` at the saddle is zero-mean
    noise of size ``offset_scale``.
    """
    if not mu > 0 or kappa < 1:
        raise ValueError(f"need mu > 0 and kappa >= 1, got mu={mu}, kappa={kappa}")
    if not 0.0 <= sym_fraction <= 1.0:
        raise ValueError("sym_fraction must be in [0, 1]")
    rng = np.random.default_rng(rng)
    target = kappa * mu
    sym_max = mu + sym_fraction * (target - mu)
    P = np.stack([_spd_with_spectrum(rng, d_x, mu, sym_max) for _ in range(n)])
    Q = np.stack([_spd_with_spectrum(rng, d_y, mu, sym_max) for _ in range(n)])
    M0 = rng.standard_normal((n, d_y, d_x))
    M0 /= np.linalg.svd(M0, compute_uv=False)[:, :1, None]
    M0 *= rng.uniform(0.5, 1.0, size=(n, 1, 1))
    z_star = rng.standard_normal(d_x + d_y)
    z_star /= np.linalg.norm(z_star)
    noise = offset_scale * rng.standard_normal((n, d_x + d_y))
    noise -= noise.mean(axis=0)

    def build(t):
        # linear terms put the mean saddle at z_star; each component is off by noise_i
        M = t * M0
        Jz = np.concatenate([
            P @ z_star[:d_x] + np.swapaxes(M, 1, 2) @ z_star[d_x:],
            -(M @ z_star[:d_x]) + Q @ z_star[d_x:],
        ], axis=1)
        h = noise - Jz
        return QuadraticSaddleSpec(P=P, Q=Q, M=M, a=h[:, :d_x], b=h[:, d_x:])

    def norm(t):
        top = np.concatenate([P, t * np.swapaxes(M0, 1, 2)], axis=2)
        bottom = np.concatenate([-t * M0, Q], axis=2)
        J = np.concatenate([top, bottom], axis=1)
        return np.linalg.norm(J, 2, axis=(1, 2)).max()

    # ||J(t)|| is convex in t and starts below the target, so the crossing is unique
    if norm(0.0) >= target * (1 - 1e-12):
        t = 0.0
    else:
        hi = target
        while norm(hi) < target:
            hi *= 2.0
        t = optimize.brentq(lambda s: norm(s) - target, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)
    problem = QuadraticSaddle(build(t), mu=mu)
    return problem


def with_saddle_at(spec: QuadraticSaddleSpec, x_bar, y_bar) -> QuadraticSaddleSpec:
    """Replace the linear terms so every component is stationary at ``(x_bar, y_bar)``."""
    x_bar = np.asarray(x_bar, dtype=float)
    y_bar = np.asarray(y_bar, dtype=float)
    a = -(spec.P @ x_bar + np.swapaxes(spec.M, 1, 2) @ y_bar)
    b = spec.M @ x_bar - spec.Q @ y_bar
    return QuadraticSaddleSpec(P=spec.P, Q=spec.Q, M=spec.M, a=a, b=b)


def bilinear_demo() -> QuadraticSaddle:
    """Single component ``f(x, y) = x^2/2 + xy - y^2/2`` (mu = 1, L = sqrt 2)."""
    spec = QuadraticSaddleSpec(P=[[[1.0]]], Q=[[[1.0]]], M=[[[1.0]]], a=[[0.0]], b=[[0.0]])
    return QuadraticSaddle(spec, mu=1.0, lip=np.sqrt(2.0))


def separable_demo(shift: float = 0.0) -> QuadraticSaddle:
    """Single component ``f(x, y) = x^2/2 - y^2/2`` shifted so the saddle is ``(shift, shift)``.

    ``mu = L = 1``; with ``gamma = 1`` Point SAGA halves the error every step.
    """
    spec = QuadraticSaddleSpec(P=[[[1.0]]], Q=[[[1.0]]], M=[[[0.0]]], a=[[-shift]], b=[[-shift]])
    return QuadraticSaddle(spec, mu=1.0, lip=1.0)


def two_component_demo() -> QuadraticSaddle:
    """Two 1-D components with a common saddle structure and analytic operators.

    ``f_1 = x^2/2 + 2xy - y^2/2 + x`` and ``f_2 = 3x^2/2 - y^2/2 - y``.
    """
    spec = QuadraticSaddleSpec(
        P=[[[1.0]], [[3.0]]],
        Q=[[[1.0]], [[1.0]]],
        M=[[[2.0]], [[0.0]]],
        a=[[1.0], [0.0]],
        b=[[0.0], [1.0]],
    )
    return QuadraticSaddle(spec)
