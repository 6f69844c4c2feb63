"""Abstract finite-sum saddle problem."""
from __future__ import annotations

import abc

import numpy as np

from ..core import OperatorValue, PrimalDualPoint, ProblemConstants, _joint_of


class UnsupportedProblem(TypeError):
    """Raised when an operation has no implementation for a problem family."""


class SaddleProblem(abc.ABC):
    """``min_x max_y (1/n) sum_i f_i(x, y)`` with per-component oracles.

    Subclasses implement the joint-vector hooks :meth:`grad` and
    :meth:`prox_split`; solvers call those directly. The ``*_component``
    methods are the block-split public surface.
    """

    constants: ProblemConstants
    d_x: int
    d_y: int
    #: False for families whose operator is a subgradient selection.
    smooth: bool = True

    @property
    def n(self) -> int:
        return self.constants.n

    @property
    def dim(self) -> int:
        return self.d_x + self.d_y

    @abc.abstractmethod
    def grad(self, i: int, z: np.ndarray) -> np.ndarray:
        """Joint operator value ``g_i(z)``."""

    @abc.abstractmethod
    def prox_split(self, i: int, gamma_x: float, gamma_y: float, z: np.ndarray) -> np.ndarray:
        """Prox of ``f_i`` with separate step sizes on the two blocks.

        Solves ``d_x f_i(u, v) + (u - p) / gamma_x = 0`` and
        ``d_y f_i(u, v) - (v - q) / gamma_y = 0`` for ``z = [p; q]``.
        """

    def prox(self, i: int, gamma: float, z: np.ndarray) -> np.ndarray:
        return self.prox_split(i, gamma, gamma, z)

    def all_grads(self, z: np.ndarray) -> np.ndarray:
        """``(n, d_x + d_y)`` array of every component operator at ``z``."""
        return np.stack([self.grad(i, z) for i in range(self.n)])

    def mean_grad(self, z: np.ndarray) -> np.ndarray:
        return self.all_grads(z).mean(axis=0)

    def value(self, i: int, z: np.ndarray) -> float:
        raise UnsupportedProblem(f"{type(self).__name__} does not expose f_i values")

    def primal_loss(self, x: np.ndarray):
        """Primal objective ``max_y f(x, y)`` when available in closed form."""
        return None

    def saddle_point(self) -> np.ndarray:
        raise UnsupportedProblem(f"no saddle oracle for {type(self).__name__}")

    def saddle_operator_values(self, z_star: np.ndarray) -> np.ndarray:
        """Per-component operator values at the saddle, summing to zero."""
        return self.all_grads(z_star)

    def operator_norm(self, scale_x: float = 1.0, scale_y: float = 1.0) -> float:
        """Max over components of ``||S^-1 J_i S^-1||`` with ``S = diag(scale)``."""
        raise UnsupportedProblem(f"{type(self).__name__} has no Jacobian bound")

    # block-split surface -------------------------------------------------

    def split(self, z: np.ndarray) -> PrimalDualPoint:
        return PrimalDualPoint.from_joint(z, self.d_x)

    def grad_component(self, i: int, point) -> OperatorValue:
        self._check_index(i)
        return OperatorValue.from_joint(self.grad(i, _joint_of(self, point)), self.d_x)

    def prox_component(self, i: int, gamma: float, point) -> PrimalDualPoint:
        self._check_index(i)
        if not gamma > 0:
            raise ValueError(f"gamma must be positive, got {gamma}")
        return self.split(self.prox(i, gamma, _joint_of(self, point)))

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise IndexError(f"component index {i} out of range for n={self.n}")


def saddle_oracle(problem: SaddleProblem) -> PrimalDualPoint:
    """Exact saddle point of a built-in problem family."""
    return problem.split(problem.saddle_point())
