"""Joint iterates, the stored-operator table and the step-size constants.

Points and operator values are kept as joint vectors ``z = [x; y]`` inside
the solvers; :class:`PrimalDualPoint` and :class:`OperatorValue` are the
public, block-split views of the same data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PrimalDualPoint",
    "OperatorValue",
    "GradientTable",
    "ProblemConstants",
    "RateConstants",
    "default_step_size",
    "rate_constants",
    "table_build",
    "table_replace",
]


def _as_vector(v, name):
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class PrimalDualPoint:
    """A primal-dual pair ``(x, y)``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _as_vector(self.x, "x"))
        object.__setattr__(self, "y", _as_vector(self.y, "y"))

    @classmethod
    def from_joint(cls, z, d_x: int) -> "PrimalDualPoint":
        z = np.asarray(z, dtype=float)
        return cls(z[:d_x].copy(), z[d_x:].copy())

    def joint(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y)))


@dataclass(frozen=True)
class OperatorValue:
    """Value of a gradient operator ``[d_x f; -d_y f]``.

    The second block is the *negated* partial derivative in ``y``, which makes
    the operator monotone for convex-concave ``f``.
    """

    gx: np.ndarray
    gy_neg: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gx", _as_vector(self.gx, "gx"))
        object.__setattr__(self, "gy_neg", _as_vector(self.gy_neg, "gy_neg"))

    @classmethod
    def from_joint(cls, g, d_x: int) -> "OperatorValue":
        g = np.asarray(g, dtype=float)
        return cls(g[:d_x].copy(), g[d_x:].copy())

    def joint(self) -> np.ndarray:
        return np.concatenate([self.gx, self.gy_neg])


@dataclass
class GradientTable:
    """Stored per-component operator values and their running mean.

    ``entries[i]`` holds ``g_i`` evaluated at the point where component ``i``
    was last visited. The mean is updated incrementally and rebuilt exactly
    after every ``n`` replacements so round-off cannot accumulate.
    """

    entries: np.ndarray
    d_x: int
    mean: np.ndarray = field(default=None)
    updates_since_rebuild: int = 0

    def __post_init__(self):
        self.entries = np.array(self.entries, dtype=float, ndmin=2)
        if self.entries.shape[0] < 1:
            raise ValueError("a gradient table needs at least one entry")
        if self.mean is None:
            self.rebuild()

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def rebuild(self) -> None:
        self.mean = self.entries.mean(axis=0)
        self.updates_since_rebuild = 0

    def entry(self, i: int) -> OperatorValue:
        return OperatorValue.from_joint(self.entries[i], self.d_x)

    def mean_value(self) -> OperatorValue:
        return OperatorValue.from_joint(self.mean, self.d_x)

    def replace(self, j: int, new) -> None:
        """Overwrite entry ``j`` (a joint vector) and refresh the mean."""
        old = self.entries[j]
        self.mean += (new - old) / self.entries.shape[0]
        self.entries[j] = new
        self.updates_since_rebuild += 1
        if self.updates_since_rebuild >= self.entries.shape[0]:
            self.rebuild()


@dataclass(frozen=True)
class ProblemConstants:
    """Component count ``n``, modulus ``mu`` and Lipschitz constant ``lip``."""

    n: int
    mu: float
    lip: float
    kappa: float = field(init=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.lip > 0:
            raise ValueError(f"lip must be positive, got {self.lip}")
        if self.lip < self.mu:
            raise ValueError(f"lip={self.lip} is smaller than mu={self.mu}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "kappa", self.lip / self.mu)


@dataclass(frozen=True)
class RateConstants:
    """Step size ``gamma``, contraction ``alpha`` and Lyapunov weight ``c``."""

    gamma: float
    alpha: float
    c: float


def default_step_size(consts: ProblemConstants) -> RateConstants:
    """Point-SAGA step size with its contraction factor and Lyapunov weight.

    ``gamma = (sqrt((n-1)^2 mu^2 + 4 L^2 n) - (n-1) mu) / (2 L^2 n)``, evaluated
    in the rationalised form ``2 / (sqrt(...) + (n-1) mu)`` which avoids the
    cancellation when ``(n-1) mu`` dominates.
    """
    n, mu, lip = consts.n, consts.mu, consts.lip
    if n < 1 or not mu > 0 or not lip > 0:
        raise ValueError(f"invalid constants n={n}, mu={mu}, lip={lip}")
    b = (n - 1) * mu
    root = math.hypot(b, 2.0 * lip * math.sqrt(n))
    gamma = 2.0 / (root + b)
    alpha = 1.0 / (1.0 + mu * gamma)
    # 1 - (n-1) mu gamma == (root - b) / (root + b) == 4 L^2 n / (root + b)^2
    one_minus = 4.0 * lip * lip * n / ((root + b) * (root + b))
    c = n * gamma * gamma / one_minus
    return RateConstants(gamma=gamma, alpha=alpha, c=c)


def rate_constants(consts: ProblemConstants, gamma: float) -> RateConstants:
    """``alpha`` and ``c`` for an arbitrary step size.

    ``c`` is ``inf`` when ``(n-1) mu gamma >= 1``; the Lyapunov function is
    then undefined.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    alpha = 1.0 / (1.0 + consts.mu * gamma)
    denom = 1.0 - (consts.n - 1) * consts.mu * gamma
    c = consts.n * gamma * gamma / denom if denom > 0 else math.inf
    return RateConstants(gamma=gamma, alpha=alpha, c=c)


def table_build(problem, point) -> GradientTable:
    """Table with every entry equal to ``g_i(point)``."""
    z = _joint_of(problem, point)
    return GradientTable(problem.all_grads(z), d_x=problem.d_x)


def table_replace(table: GradientTable, j: int, new_value) -> None:
    if not 0 <= j < table.n:
        raise IndexError(f"table index {j} out of range for n={table.n}")
    if isinstance(new_value, OperatorValue):
        new_value = new_value.joint()
    new_value = np.asarray(new_value, dtype=float)
    if new_value.shape != table.entries.shape[1:]:
        raise ValueError(
            f"operator value has shape {new_value.shape}, "
            f"table expects {table.entries.shape[1:]}"
        )
    table.replace(j, new_value)


def _joint_of(problem, point) -> np.ndarray:
    if isinstance(point, PrimalDualPoint):
        if point.x.shape[0] != problem.d_x or point.y.shape[0] != problem.d_y:
            raise ValueError(
                f"point has dimensions ({point.x.shape[0]}, {point.y.shape[0]}), "
                f"problem expects ({problem.d_x}, {problem.d_y})"
            )
        return point.joint()
    z = np.asarray(point, dtype=float)
    if z.shape != (problem.d_x + problem.d_y,):
        raise ValueError(
            f"joint point has shape {z.shape}, expected ({problem.d_x + problem.d_y},)"
        )
    return z
