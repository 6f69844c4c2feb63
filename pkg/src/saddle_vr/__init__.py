"""Point SAGA and variance-reduced baselines for finite-sum saddle problems."""
from .core import (
    GradientTable,
    OperatorValue,
    PrimalDualPoint,
    ProblemConstants,
    RateConstants,
    default_step_size,
    rate_constants,
    table_build,
    table_replace,
)

__version__ = "0.1.0"

__all__ = [
    "GradientTable",
    "OperatorValue",
    "PrimalDualPoint",
    "ProblemConstants",
    "RateConstants",
    "default_step_size",
    "rate_constants",
    "table_build",
    "table_replace",
]
