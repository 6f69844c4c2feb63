"""Run configuration, trace rows and run results."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Union

import numpy as np

from ..core import PrimalDualPoint

METHODS = (
    "point_saga",
    "saga",
    "svrg",
    "svrg_catalyst",
    "saga_catalyst",
    "fb",
    "afb",
    "sfb",
    "point_saga_nonsmooth",
)

#: step sizes tried when tuning baselines
STEP_GRID = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
#: catalyst regularization multipliers; the strength is ``gamma * tau``
TAU_GRID = (1.0, 10.0, 100.0, 1000.0, 10000.0)

TRACE_COLUMNS = ("iter", "grad_evals", "dist_sq", "lyapunov", "primal_gap", "wall_seconds")


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of one solver run.

    ``gamma="auto"`` resolves to the analysis step size for ``point_saga``,
    to ``R / (B sqrt(n))`` for ``point_saga_nonsmooth`` and to the best value of
    :data:`STEP_GRID` in a short pilot run for every other method.
    ``epochs`` bounds the run in units of ``n`` component oracle calls, the
    initial table or snapshot pass included; ``max_iter`` optionally caps the
    iteration count as well.
    ``tau`` is the catalyst regularization strength added to both blocks.
    ``target`` stops the run once ``target_metric`` drops to it, and a run
    is declared diverged once ``dist_sq`` exceeds ``divergence_factor`` times
    its initial value.
    """

    method: str = "point_saga"
    gamma: Union[float, str] = "auto"
    theta: float = 0.9
    tau: Optional[float] = None
    m: Optional[int] = None
    epochs: float = 10
    max_iter: Optional[int] = None
    seed: int = 0
    trace_every: Optional[int] = None
    target: Optional[float] = None
    target_metric: str = "dist_sq"
    inner_epochs: float = 2
    bound_b: Optional[float] = None
    bound_r: Optional[float] = None
    pilot_epochs: Optional[float] = None
    divergence_factor: float = 1e12

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if isinstance(self.gamma, str):
            if self.gamma != "auto":
                raise ValueError(f"gamma must be a positive number or 'auto', got {self.gamma!r}")
        elif not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not 0.0 <= self.theta < 1.0:
            raise ValueError(f"theta must lie in [0, 1), got {self.theta}")
        if self.tau is not None and self.tau < 0:
            raise ValueError(f"tau must be non-negative, got {self.tau}")
        if self.m is not None and self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        if not self.epochs > 0:
            raise ValueError(f"epochs must be positive, got {self.epochs}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.max_iter is not None and self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")
        if self.trace_every is not None and self.trace_every < 1:
            raise ValueError("trace_every must be a positive integer")
        if self.target_metric not in ("dist_sq", "primal_gap"):
            raise ValueError(f"unknown target metric {self.target_metric!r}")
        if not self.inner_epochs > 0:
            raise ValueError("inner_epochs must be positive")
        if not self.divergence_factor > 1:
            raise ValueError("divergence_factor must exceed 1")
        for name in ("bound_b", "bound_r"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class TraceRow:
    iter: int
    grad_evals: int
    dist_sq: float
    lyapunov: Optional[float] = None
    primal_gap: Optional[float] = None
    wall_seconds: float = 0.0

    def as_tuple(self):
        return tuple(getattr(self, c) for c in TRACE_COLUMNS)


@dataclass
class RunResult:
    method: str
    config: SolverConfig
    gamma: float
    rows: list
    final: PrimalDualPoint
    status: str = "max_epochs"
    message: str = ""
    averaged: Optional[PrimalDualPoint] = None
    extras: dict = field(default_factory=dict)

    @property
    def diverged(self) -> bool:
        return self.status == "diverged"

    @property
    def final_dist_sq(self) -> float:
        return self.rows[-1].dist_sq if self.rows else float("nan")

    @property
    def grad_evals(self) -> int:
        return self.rows[-1].grad_evals if self.rows else 0

    def metric(self, name: str = "dist_sq") -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.rows])

    def evals_to(self, target: float, metric: str = "dist_sq") -> Optional[int]:
        """Grad evals at the first trace row whose metric is at or below ``target``."""
        for r in self.rows:
            v = getattr(r, metric)
            if v is not None and v <= target:
                return r.grad_evals
        return None
