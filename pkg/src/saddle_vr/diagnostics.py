"""Lyapunov evaluation, inequality checkers and empirical rate fits.

Every checker returns an :class:`InequalityCheck` that states ``lhs >= rhs``
up to a relative round-off tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import GradientTable, RateConstants, _joint_of

#: relative tolerance on inequality slacks
SLACK_TOL = 1e-9
#: largest ``n`` for which expectations are enumerated
MAX_ENUMERATION = 10_000


@dataclass(frozen=True)
class LyapunovReport:
    """``t_value = table_term + dist_term`` for one solver state."""

    t_value: float
    table_term: float
    dist_term: float
    alpha: float


@dataclass(frozen=True)
class InequalityCheck:
    """Outcome of checking ``lhs >= rhs``."""

    lhs: float
    rhs: float
    slack: float
    passed: bool

    @classmethod
    def of(cls, lhs, rhs, tol=SLACK_TOL) -> "InequalityCheck":
        lhs, rhs = float(lhs), float(rhs)
        slack = lhs - rhs
        return cls(lhs=lhs, rhs=rhs, slack=slack, passed=bool(slack >= -tol * (1.0 + abs(rhs))))

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "slack": self.slack, "passed": self.passed}


@dataclass
class PointSagaState:
    """Iterate and gradient table of a Point SAGA run."""

    point: np.ndarray
    table: GradientTable


def _table_entries(problem, table) -> np.ndarray:
    entries = table.entries if isinstance(table, GradientTable) else np.asarray(table, dtype=float)
    if entries.shape != (problem.n, problem.dim):
        raise ValueError(f"table has shape {entries.shape}, problem expects {(problem.n, problem.dim)}")
    return entries


def lyapunov_value(problem, table, point, rate_consts: RateConstants, oracle_point) -> LyapunovReport:
    """``c/n sum_i |table_i - g_i(z*)|^2 + |z - z*|^2``.

    ``g_i(z*)`` is the problem's saddle operator selection, which for
    non-smooth problems is a subgradient choice with zero mean.
    """
    z = _joint_of(problem, point)
    z_star = _joint_of(problem, oracle_point)
    entries = _table_entries(problem, table)
    g_star = problem.saddle_operator_values(z_star)
    diff = entries - g_star
    table_term = rate_consts.c / problem.n * float(np.einsum("ij,ij->", diff, diff))
    dz = z - z_star
    dist_term = float(dz @ dz)
    return LyapunovReport(
        t_value=table_term + dist_term, table_term=table_term,
        dist_term=dist_term, alpha=rate_consts.alpha,
    )


def point_saga_transition(problem, z, entries, mean, gamma, j):
    """Successor iterate and new table entry ``j`` for a fixed draw ``j``."""
    p = z + gamma * (entries[j] - mean)
    z_new = problem.prox(j, gamma, p)
    return z_new, (p - z_new) / gamma


def _next_lyapunov(problem, z, entries, mean, gamma, j, g_star, c, base_sq, z_star):
    z_new, g_new = point_saga_transition(problem, z, entries, mean, gamma, j)
    old = entries[j] - g_star[j]
    new = g_new - g_star[j]
    table_sq = base_sq - old @ old + new @ new
    dz = z_new - z_star
    return c / problem.n * table_sq + dz @ dz


def check_contraction(problem, state: PointSagaState, rate_consts: RateConstants,
                      oracle_point=None, samples=None, rng=None) -> InequalityCheck:
    """Check ``alpha T^k >= E[T^{k+1}]`` for one Point SAGA step from ``state``.

    The expectation over the drawn component is exact (all ``n`` choices are
    enumerated) unless ``samples`` is given, in which case it is a Monte-Carlo
    mean over that many draws; the sampled form exists only to cross-check
    the enumeration.
    """
    n = problem.n
    if samples is None and n > MAX_ENUMERATION:
        raise ValueError(f"n={n} exceeds the enumeration budget of {MAX_ENUMERATION}")
    if oracle_point is None:
        from .problems import saddle_oracle

        oracle_point = saddle_oracle(problem)
    z = _joint_of(problem, state.point)
    z_star = _joint_of(problem, oracle_point)
    entries = _table_entries(problem, state.table)
    mean = entries.mean(axis=0)
    gamma, c = rate_consts.gamma, rate_consts.c
    g_star = problem.saddle_operator_values(z_star)
    diff = entries - g_star
    base_sq = float(np.einsum("ij,ij->", diff, diff))
    dz = z - z_star
    t_now = c / n * base_sq + float(dz @ dz)
    if samples is None:
        draws = range(n)
    else:
        rng = np.random.default_rng(rng)
        draws = rng.integers(0, n, size=int(samples)).tolist()
    total, count = 0.0, 0
    for j in draws:
        total += _next_lyapunov(problem, z, entries, mean, gamma, j, g_star, c, base_sq, z_star)
        count += 1
    expected = total / count if count else 0.0
    return InequalityCheck.of(rate_consts.alpha * t_now, expected)


def _pair(problem, point_pair):
    a, b = point_pair
    return _joint_of(problem, a), _joint_of(problem, b)


def check_lemma1(problem, i, gamma, point_pair) -> InequalityCheck:
    """Strong monotonicity ``<g_i(p1) - g_i(p2), p1 - p2> >= mu |p1 - p2|^2``.

    ``gamma`` is unused; it is accepted so all checkers share one signature.
    """
    p1, p2 = _pair(problem, point_pair)
    d = p1 - p2
    dg = problem.grad(i, p1) - problem.grad(i, p2)
    return InequalityCheck.of(dg @ d, problem.constants.mu * (d @ d))


def check_lemma2(problem, i, gamma, point_pair) -> InequalityCheck:
    """``<p1 - p2, u1 - u2> >= (1 + mu gamma) |u1 - u2|^2`` with ``u = prox(p)``."""
    p1, p2 = _pair(problem, point_pair)
    du = problem.prox(i, gamma, p1) - problem.prox(i, gamma, p2)
    return InequalityCheck.of((p1 - p2) @ du, (1.0 + problem.constants.mu * gamma) * (du @ du))


def check_theorem1(problem, i, gamma, point_pair) -> InequalityCheck:
    """``<g_i(u1) - g_i(u2), p1 - p2> >= gamma (1 + mu/(L^2 gamma)) |g_i(u1) - g_i(u2)|^2``.

    The operator is evaluated at the prox outputs ``u = prox(p)``.
    """
    p1, p2 = _pair(problem, point_pair)
    u1, u2 = problem.prox(i, gamma, p1), problem.prox(i, gamma, p2)
    dg = problem.grad(i, u1) - problem.grad(i, u2)
    mu, lip = problem.constants.mu, problem.constants.lip
    return InequalityCheck.of(dg @ (p1 - p2), gamma * (1.0 + mu / (lip * lip * gamma)) * (dg @ dg))


def estimate_rate(trace, burn_in_fraction: float = 0.2) -> float:
    """Per-iteration contraction ``alpha_hat`` from a least-squares fit of ``log dist_sq``.

    Parameters
    ----------
    trace : sequence of TraceRow, RunResult, or ``(iter, dist_sq)`` pairs
    burn_in_fraction : float
        Leading fraction of rows to discard before fitting.

    Returns
    -------
    float
        ``exp(slope)`` clipped to ``(0, 1]``.
    """
    rows = getattr(trace, "rows", trace)
    pts = []
    for r in rows:
        if hasattr(r, "dist_sq"):
            pts.append((r.iter, r.dist_sq))
        else:
            pts.append((r[0], r[1]))
    if not 0.0 <= burn_in_fraction < 1.0:
        raise ValueError(f"burn_in_fraction must lie in [0, 1), got {burn_in_fraction}")
    pts = pts[int(math.floor(burn_in_fraction * len(pts))):]
    if len(pts) < 20:
        raise ValueError(f"need at least 20 rows after burn-in, got {len(pts)}")
    it = np.array([p[0] for p in pts], dtype=float)
    d = np.array([p[1] for p in pts], dtype=float)
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        raise ValueError("dist_sq must be finite and positive on every fitted row")
    slope = np.polyfit(it, np.log(d), 1)[0]
    return float(min(math.exp(slope), 1.0))


def corollary_envelope(rate_consts: RateConstants, lip: float, dist0: float, k) -> np.ndarray:
    """``alpha^k (c L^2 + 1) dist0``, the bound on the expected squared distance."""
    k = np.asarray(k, dtype=float)
    return rate_consts.alpha ** k * (rate_consts.c * lip * lip + 1.0) * dist0


def point_saga_states(problem, gamma, count, start=None, rng=None):
    """``count`` successive states of a Point SAGA run, starting from a table at ``start``."""
    rng = np.random.default_rng(rng)
    z = np.zeros(problem.dim) if start is None else _joint_of(problem, start).copy()
    table = GradientTable(problem.all_grads(z), d_x=problem.d_x)
    states = []
    for _ in range(count):
        states.append(PointSagaState(z.copy(), GradientTable(table.entries.copy(), d_x=problem.d_x)))
        j = int(rng.integers(problem.n))
        z, g = point_saga_transition(problem, z, table.entries, table.mean, gamma, j)
        table.replace(j, g)
    return states


__all__ = [
    "SLACK_TOL",
    "MAX_ENUMERATION",
    "LyapunovReport",
    "InequalityCheck",
    "PointSagaState",
    "lyapunov_value",
    "point_saga_transition",
    "check_contraction",
    "check_lemma1",
    "check_lemma2",
    "check_theorem1",
    "estimate_rate",
    "corollary_envelope",
    "point_saga_states",
]
