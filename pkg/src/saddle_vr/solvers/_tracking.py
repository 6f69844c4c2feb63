from __future__ import annotations

import math
import time

import numpy as np

from .config import TraceRow

DIVERGENCE_FACTOR = 1e12
INDEX_BLOCK = 1024


def index_stream(rng: np.random.Generator, n: int):
    """Endless stream of uniform component indices, drawn in fixed blocks."""
    while True:
        yield from rng.integers(0, n, size=INDEX_BLOCK).tolist()


class Tracker:
    """Collects trace rows and decides when a run stops.

    A run stops when the iterate stops being finite, when ``dist_sq`` grows
    past ``config.divergence_factor`` times its first recorded value, or when the
    configured target is reached.
    """

    def __init__(self, problem, config, z_star=None, g_star=None, lyap_c=None, every=1):
        self.problem = problem
        self.config = config
        self.z_star = z_star
        self.g_star = g_star
        self.lyap_c = lyap_c if lyap_c is not None and math.isfinite(lyap_c) else None
        self.every = max(1, int(every))
        self.factor = getattr(config, "divergence_factor", DIVERGENCE_FACTOR)
        self.rows: list[TraceRow] = []
        self.status = "max_epochs"
        self.message = ""
        self.last_iter = -1
        self._dist0 = None
        self._t0 = time.perf_counter()
        self._loss_star = None
        if z_star is not None:
            loss = problem.primal_loss(z_star[: problem.d_x])
            self._loss_star = loss

    def record(self, it: int, evals: int, z, table=None, report_z=None) -> bool:
        """Append a row; return True when the run must stop."""
        self.last_iter = it
        zr = z if report_z is None else report_z
        finite = bool(np.all(np.isfinite(z)))
        dist_sq = math.nan
        if self.z_star is not None and finite:
            diff = zr - self.z_star
            dist_sq = float(diff @ diff)
        lyap = None
        if table is not None and self.lyap_c is not None and self.g_star is not None and finite:
            dz = z - self.z_star
            tab = table.entries - self.g_star
            lyap = float(self.lyap_c / table.n * np.einsum("ij,ij->", tab, tab) + dz @ dz)
        gap = None
        if self._loss_star is not None and finite:
            gap = self.problem.primal_loss(zr[: self.problem.d_x]) - self._loss_star
        self.rows.append(
            TraceRow(
                iter=int(it),
                grad_evals=int(evals),
                dist_sq=dist_sq,
                lyapunov=lyap,
                primal_gap=gap,
                wall_seconds=time.perf_counter() - self._t0,
            )
        )
        if not finite:
            self.status = "diverged"
            self.message = f"non-finite iterate at iteration {it}"
            return True
        if self._dist0 is None:
            self._dist0 = dist_sq
        elif self._dist0 > 0 and dist_sq > self.factor * self._dist0:
            self.status = "diverged"
            self.message = f"dist_sq={dist_sq:.3e} exceeded {self.factor:.0e} x initial at iteration {it}"
            return True
        target = self.config.target
        if target is not None:
            value = dist_sq if self.config.target_metric == "dist_sq" else gap
            if value is not None and value <= target:
                self.status = "converged"
                return True
        return False

    def maybe_record(self, it, evals, z, table=None, report_z=None) -> bool:
        if it % self.every == 0:
            return self.record(it, evals, z, table, report_z)
        return False

    def finish(self, it, evals, z, table=None, report_z=None) -> None:
        if self.last_iter != it and self.status == "max_epochs":
            self.record(it, evals, z, table, report_z)
