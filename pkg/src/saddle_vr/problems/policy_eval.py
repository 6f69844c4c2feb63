"""Regularized EM-MSPBE policy evaluation as a saddle problem.

Per sample ``i`` with features ``phi_i``, next features ``phi'_i`` and reward
``r_i`` let ``z_i = phi_i``, ``zp_i = phi_i - eta phi'_i``, ``b_i = r_i phi_i``,
``A_i = z_i zp_i'`` and ``C_i = z_i z_i'``. Then

    f_i(x, y) = rho/2 |x|^2 - y'A_i x - 1/2 y'(C_i + lam I) y + y'b_i

and ``max_y (1/n) sum_i f_i(x, y)`` is the primal loss
``1/2 (Ax - b)'(C + lam I)^-1 (Ax - b) + rho/2 |x|^2`` built from the sample
means. Every component prox costs O(d) through a rank-one Woodbury solve.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..core import ProblemConstants
from .base import SaddleProblem
from .quadratic import QuadraticSaddle, QuadraticSaddleSpec


@dataclass(frozen=True)
class PolicyEvalSpec:
    z: np.ndarray   # (n, d) features
    zp: np.ndarray  # (n, d) features minus discounted next features
    b: np.ndarray   # (n, d) reward-weighted features
    rho: float
    lam: float
    eta: float = 0.0

    def __post_init__(self):
        z = np.array(self.z, dtype=float, ndmin=2)
        zp = np.array(self.zp, dtype=float, ndmin=2)
        b = np.array(self.b, dtype=float, ndmin=2)
        if not (z.shape == zp.shape == b.shape):
            raise ValueError(f"z, zp, b shapes differ: {z.shape}, {zp.shape}, {b.shape}")
        if not self.rho > 0 or not self.lam > 0:
            raise ValueError(f"rho and lam must be positive, got {self.rho}, {self.lam}")
        if not 0.0 <= self.eta < 1.0:
            raise ValueError(f"eta must lie in [0, 1), got {self.eta}")
        for arr, name in ((z, "z"), (zp, "zp"), (b, "b")):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "zp", zp)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_trajectories(cls, batch, rho: float, lam: float) -> "PolicyEvalSpec":
        phi, phi_next = batch.phi, batch.phi_next
        return cls(
            z=phi,
            zp=phi - batch.eta * phi_next,
            b=batch.rewards[:, None] * phi,
            rho=rho,
            lam=lam,
            eta=batch.eta,
        )

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def d(self) -> int:
        return self.z.shape[1]

    def sample_means(self):
        n = self.n
        A = self.z.T @ self.zp / n
        C = self.z.T @ self.z / n
        return A, C, self.b.mean(axis=0)


def _component_norms(rho, lam, za, zpa):
    """Exact ``||J_i||`` for every component.

    ``J_i`` maps the plane spanned by ``(zp_i, 0)`` and ``(0, z_i)`` into itself,
    where it acts as ``[[rho, -|z||zp|], [|z||zp|, lam + |z|^2]]``, and acts as
    ``diag(rho, lam)`` on the orthogonal complement. The 2x2 block norm already
    dominates ``rho`` and ``lam``.
    """
    ab = za * zpa
    blocks = np.empty((za.shape[0], 2, 2))
    blocks[:, 0, 0] = rho
    blocks[:, 0, 1] = -ab
    blocks[:, 1, 0] = ab
    blocks[:, 1, 1] = lam + za * za
    return np.linalg.svd(blocks, compute_uv=False)[:, 0]


class PolicyEvalProblem(SaddleProblem):
    """EM-MSPBE saddle problem.

    ``mu = min(rho, lam)``; ``lip`` is the largest per-component Jacobian norm,
    computed in closed form. :meth:`prox_split` is the O(d) Woodbury solve and
    :meth:`dense_equivalent` gives the same problem as a
    :class:`~saddle_vr.problems.quadratic.QuadraticSaddle` for cross-checks.
    """

    def __init__(self, spec: PolicyEvalSpec, lip: float | None = None):
        self.spec = spec
        self.d_x = self.d_y = spec.d
        self._z, self._zp, self._b = spec.z, spec.zp, spec.b
        self._za = np.linalg.norm(spec.z, axis=1)
        self._zpa = np.linalg.norm(spec.zp, axis=1)
        mu = min(spec.rho, spec.lam)
        if lip is None:
            lip = float(_component_norms(spec.rho, spec.lam, self._za, self._zpa).max())
        self.constants = ProblemConstants(n=spec.n, mu=mu, lip=max(lip, mu))
        self.A_mean, self.C_mean, self.b_mean = spec.sample_means()
        self._chol = scipy.linalg.cho_factor(self.C_mean + spec.lam * np.eye(spec.d))
        self._loss_star = None

    def grad(self, i, zz):
        d, rho, lam = self.d_x, self.spec.rho, self.spec.lam
        x, y = zz[:d], zz[d:]
        z, zp = self._z[i], self._zp[i]
        out = np.empty(2 * d)
        out[:d] = rho * x - zp * (z @ y)
        out[d:] = z * (zp @ x + z @ y) + lam * y - self._b[i]
        return out

    def all_grads(self, zz):
        d, rho, lam = self.d_x, self.spec.rho, self.spec.lam
        x, y = zz[:d], zz[d:]
        zy = self._z @ y
        zpx = self._zp @ x
        gx = rho * x[None, :] - self._zp * zy[:, None]
        gy = self._z * (zpx + zy)[:, None] + lam * y[None, :] - self._b
        return np.concatenate([gx, gy], axis=1)

    def mean_grad(self, zz):
        d, rho, lam = self.d_x, self.spec.rho, self.spec.lam
        x, y = zz[:d], zz[d:]
        gx = rho * x - self.A_mean.T @ y
        gy = self.A_mean @ x + self.C_mean @ y + lam * y - self.b_mean
        return np.concatenate([gx, gy])

    def prox_split(self, i, gamma_x, gamma_y, zz):
        """Woodbury prox in O(d).

        With ``s = gamma_x rho + 1`` the stationarity system reduces to
        ``u = (gamma_x zp (z'v) + x) / s`` and
        ``(w_shift I + (1 + gamma_x |zp|^2 / s) z z') v = w`` where
        ``w_shift = lam + 1/gamma_y`` and ``w = b + y/gamma_y - (zp'x / s) z``.
        The rank-one system is solved separately along ``z`` and on its
        orthogonal complement, which avoids cancellation at large steps.
        """
        d = self.d_x
        x, y = zz[:d], zz[d:]
        z, zp, b = self._z[i], self._zp[i], self._b[i]
        s = gamma_x * self.spec.rho + 1.0
        shift = self.spec.lam + 1.0 / gamma_y
        w = b + y / gamma_y - ((zp @ x) / s) * z
        za2 = self._za[i] ** 2
        if za2 > 0.0:
            coef = 1.0 + gamma_x * self._zpa[i] ** 2 / s
            along = (z @ w) / za2
            v = (w - along * z) / shift + (along / (shift + coef * za2)) * z
        else:
            v = w / shift
        u = (gamma_x * (z @ v)) * zp / s + x / s
        out = np.empty(2 * d)
        out[:d] = u
        out[d:] = v
        return out

    def value(self, i, zz):
        d, rho, lam = self.d_x, self.spec.rho, self.spec.lam
        x, y = zz[:d], zz[d:]
        z, zp, b = self._z[i], self._zp[i], self._b[i]
        return float(
            0.5 * rho * x @ x - (y @ z) * (zp @ x) - 0.5 * ((z @ y) ** 2 + lam * y @ y) + y @ b
        )

    def jacobian(self, i: int) -> np.ndarray:
        return self.dense_equivalent(indices=[i]).J[0]

    def dense_equivalent(self, indices=None) -> QuadraticSaddle:
        """The same components written as a dense quadratic saddle."""
        idx = np.arange(self.n) if indices is None else np.asarray(indices)
        z, zp, b = self._z[idx], self._zp[idx], self._b[idx]
        d, k = self.d_x, len(idx)
        eye = np.eye(d)
        spec = QuadraticSaddleSpec(
            P=np.broadcast_to(self.spec.rho * eye, (k, d, d)),
            Q=z[:, :, None] * z[:, None, :] + self.spec.lam * eye,
            M=-(z[:, :, None] * zp[:, None, :]),
            a=np.zeros((k, d)),
            b=-b,
        )
        return QuadraticSaddle(spec, mu=self.constants.mu, lip=self.constants.lip)

    def saddle_point(self):
        d, rho, lam = self.d_x, self.spec.rho, self.spec.lam
        K = np.zeros((2 * d, 2 * d))
        K[:d, :d] = rho * np.eye(d)
        K[:d, d:] = -self.A_mean.T
        K[d:, :d] = self.A_mean
        K[d:, d:] = self.C_mean + lam * np.eye(d)
        rhs = np.concatenate([np.zeros(d), self.b_mean])
        return np.linalg.solve(K, rhs)

    def primal_loss(self, x):
        r = self.A_mean @ x - self.b_mean
        return float(0.5 * r @ scipy.linalg.cho_solve(self._chol, r) + 0.5 * self.spec.rho * x @ x)

    def primal_gap(self, x) -> float:
        if self._loss_star is None:
            self._loss_star = self.primal_loss(self.saddle_point()[: self.d_x])
        return self.primal_loss(x) - self._loss_star

    def operator_norm(self, scale_x=1.0, scale_y=1.0):
        sx, sy = np.sqrt(scale_x), np.sqrt(scale_y)
        return float(
            _component_norms(
                self.spec.rho / scale_x, self.spec.lam / scale_y,
                self._za / sy, self._zpa / sx,
            ).max()
        )


def mspbe_prox_woodbury(spec_or_problem, i: int, gamma: float, point):
    problem = _as_problem(spec_or_problem)
    return problem.prox_component(i, gamma, point)


def mspbe_primal_loss(spec_or_problem, x) -> float:
    return _as_problem(spec_or_problem).primal_loss(np.asarray(x, dtype=float))


def _as_problem(obj) -> PolicyEvalProblem:
    if isinstance(obj, PolicyEvalProblem):
        return obj
    if isinstance(obj, PolicyEvalSpec):
        return PolicyEvalProblem(obj)
    raise TypeError(f"expected PolicyEvalSpec or PolicyEvalProblem, got {type(obj).__name__}")
