"""Point SAGA and the baseline saddle-point solvers."""
from .api import resolve_gamma, run, score, select_step_size, tune
from .catalyst import RegularizedProblem, catalyst_run, default_tau
from .config import METHODS, STEP_GRID, TAU_GRID, TRACE_COLUMNS, RunResult, SolverConfig, TraceRow
from .forward_backward import afb_run, fb_run, sfb_run
from .point_saga import (
    measured_bounds,
    nonsmooth_bound,
    point_saga_nonsmooth_run,
    point_saga_run,
    point_saga_steps,
)
from .variance_reduced import saga_run, svrg_run

__all__ = [
    "METHODS",
    "STEP_GRID",
    "TAU_GRID",
    "TRACE_COLUMNS",
    "SolverConfig",
    "TraceRow",
    "RunResult",
    "run",
    "score",
    "resolve_gamma",
    "select_step_size",
    "tune",
    "point_saga_run",
    "point_saga_steps",
    "point_saga_nonsmooth_run",
    "measured_bounds",
    "nonsmooth_bound",
    "saga_run",
    "svrg_run",
    "fb_run",
    "afb_run",
    "sfb_run",
    "catalyst_run",
    "default_tau",
    "RegularizedProblem",
]
