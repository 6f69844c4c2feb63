"""Concrete saddle problem families."""
from .base import SaddleProblem, UnsupportedProblem, saddle_oracle
from .nonsmooth import (
    NonsmoothSeparable,
    NonsmoothSeparableSpec,
    nonsmooth_prox,
    random_nonsmooth,
    soft_threshold,
)
from .policy_eval import (
    PolicyEvalProblem,
    PolicyEvalSpec,
    mspbe_primal_loss,
    mspbe_prox_woodbury,
)
from .quadratic import (
    QuadraticSaddle,
    QuadraticSaddleSpec,
    bilinear_demo,
    random_quadratic,
    separable_demo,
    two_component_demo,
    with_saddle_at,
)
from .scaling import ScaledProblem, scale_problem


def quadratic_prox(spec: QuadraticSaddleSpec, i: int, gamma: float, point):
    return QuadraticSaddle(spec).prox_component(i, gamma, point)


__all__ = [
    "SaddleProblem",
    "UnsupportedProblem",
    "saddle_oracle",
    "QuadraticSaddle",
    "QuadraticSaddleSpec",
    "quadratic_prox",
    "random_quadratic",
    "with_saddle_at",
    "bilinear_demo",
    "separable_demo",
    "two_component_demo",
    "PolicyEvalProblem",
    "PolicyEvalSpec",
    "mspbe_prox_woodbury",
    "mspbe_primal_loss",
    "NonsmoothSeparable",
    "NonsmoothSeparableSpec",
    "nonsmooth_prox",
    "random_nonsmooth",
    "soft_threshold",
    "ScaledProblem",
    "scale_problem",
]
