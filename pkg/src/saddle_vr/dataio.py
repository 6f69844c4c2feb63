"""Synthetic trajectories and the CSV/JSON formats for data and traces.

Trajectory files look like::

    # n=2 d=1 eta=0.9
    r,phi_0,phin_0
    0.5,1.0,0.25
    -1.0,2.0,0.5

Floats are written with ``repr``, the shortest decimal string that parses
back to the same binary64 value, so a save/load round trip is lossless.
"""
from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass

import numpy as np

from .solvers.config import TRACE_COLUMNS, TraceRow

_MASK = (1 << 64) - 1
# splitmix64 increment and output multipliers
_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_MUL1 = 0xBF58476D1CE4E5B9
_SM_MUL2 = 0x94D049BB133111EB


class DataFormatError(ValueError):
    """Malformed trajectory or trace file; the message names the offending line."""


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256:
    """xoshiro256** 1.0 seeded through splitmix64.

    Seeding: ``s = seed``; four times ``s += 0x9E3779B97F4A7C15``,
    ``z = (s ^ (s >> 30)) * 0xBF58476D1CE4E5B9``,
    ``z = (z ^ (z >> 27)) * 0x94D049BB133111EB``, state word ``z ^ (z >> 31)``.
    Output: ``rotl(s1 * 5, 7) * 9``, then the usual xoshiro256 state update
    with shift 17 and rotation 45. All arithmetic is modulo ``2**64``.

    Uniforms use the top 53 bits, ``(x >> 11) * 2**-53``; normals come from the
    Box-Muller transform of two uniforms, both outputs used in order.
    """

    def __init__(self, seed: int):
        s = int(seed) & _MASK
        state = []
        for _ in range(4):
            s = (s + _SM_GAMMA) & _MASK
            z = s
            z = ((z ^ (z >> 30)) * _SM_MUL1) & _MASK
            z = ((z ^ (z >> 27)) * _SM_MUL2) & _MASK
            state.append(z ^ (z >> 31))
        self.s = state
        self._spare = None

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s
        result = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def uniform(self) -> float:
        """Uniform on ``[0, 1)``."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def normal(self) -> float:
        if self._spare is not None:
            v, self._spare = self._spare, None
            return v
        u1 = 1.0 - self.uniform()  # (0, 1], keeps log finite
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        t = 2.0 * math.pi * u2
        self._spare = r * math.sin(t)
        return r * math.cos(t)

    def normals(self, size: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(size)], dtype=float)


@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    """Transitions ``(r_i, phi_i, phi_next_i)`` with discount ``eta``."""

    rewards: np.ndarray
    phi: np.ndarray
    phi_next: np.ndarray
    eta: float

    def __post_init__(self):
        r = np.array(self.rewards, dtype=float).reshape(-1)
        phi = np.array(self.phi, dtype=float, ndmin=2)
        phin = np.array(self.phi_next, dtype=float, ndmin=2)
        if phi.shape != phin.shape or phi.shape[0] != r.shape[0]:
            raise ValueError(
                f"inconsistent shapes: rewards {r.shape}, phi {phi.shape}, phi_next {phin.shape}"
            )
        if r.shape[0] < 1 or phi.shape[1] < 1:
            raise ValueError("a batch needs n >= 1 rows and d >= 1 features")
        if not 0.0 <= self.eta < 1.0:
            raise ValueError(f"eta must lie in [0, 1), got {self.eta}")
        for a in (r, phi, phin):
            a.setflags(write=False)
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "phi_next", phin)
        object.__setattr__(self, "eta", float(self.eta))

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    @property
    def d(self) -> int:
        return self.phi.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrajectoryBatch):
            return NotImplemented
        # bitwise comparison, so -0.0 != 0.0 and NaN payloads count
        return (
            self.eta == other.eta
            and all(
                a.shape == b.shape and a.tobytes() == b.tobytes()
                for a, b in ((self.rewards, other.rewards), (self.phi, other.phi),
                             (self.phi_next, other.phi_next))
            )
        )

    __hash__ = None


FEATURE_MODELS = ("gaussian", "random_walk")


def generate_trajectories(seed: int, n: int, d: int, eta: float = 0.95,
                          feature_model: str = "gaussian", noise: float = 0.1,
                          weights=None, step: float = 0.1) -> TrajectoryBatch:
    """Synthetic transitions with rewards linear in the features.

    Draw order from one :class:`Xoshiro256` stream: the hidden weights
    ``w ~ N(0, I)`` (skipped when ``weights`` is given), then per row ``phi``,
    the ``d`` normals of ``phi_next`` or of its increment, and one reward noise.

    Parameters
    ----------
    seed : int
        Unsigned 64-bit seed.
    n, d : int
        Rows and feature dimension.
    eta : float
        Discount in ``[0, 1)``.
    feature_model : {"gaussian", "random_walk"}
        ``gaussian`` draws ``phi`` and ``phi_next`` independently from
        ``N(0, I/d)``; ``random_walk`` sets ``phi_next = phi + step * N(0, I/d)``.
    noise : float
        Standard deviation of the reward noise.
    weights : array_like, optional
        Hidden weight vector; a scalar broadcasts to all features.
    """
    n, d = int(n), int(d)
    if n < 1 or d < 1:
        raise ValueError(f"n and d must be positive, got n={n}, d={d}")
    if feature_model not in FEATURE_MODELS:
        raise ValueError(f"feature_model must be one of {FEATURE_MODELS}, got {feature_model!r}")
    if noise < 0 or step < 0:
        raise ValueError("noise and step must be non-negative")
    rng = Xoshiro256(seed)
    if weights is None:
        w = rng.normals(d)
    else:
        w = np.broadcast_to(np.asarray(weights, dtype=float), (d,)).copy()
    scale = 1.0 / math.sqrt(d)
    phi = np.empty((n, d))
    phin = np.empty((n, d))
    eps = np.empty(n)
    for i in range(n):
        phi[i] = scale * rng.normals(d)
        draw = scale * rng.normals(d)
        phin[i] = draw if feature_model == "gaussian" else phi[i] + step * draw
        eps[i] = rng.normal()
    rewards = phi @ w + noise * eps
    return TrajectoryBatch(rewards=rewards, phi=phi, phi_next=phin, eta=eta)


def _fmt(v) -> str:
    return repr(float(v))


_PREAMBLE = re.compile(r"^#\s*n=(\S+)\s+d=(\S+)\s+eta=(\S+)\s*$")


def trajectory_header(d: int) -> list:
    return ["r"] + [f"phi_{k}" for k in range(d)] + [f"phin_{k}" for k in range(d)]


def save_trajectories(path, batch: TrajectoryBatch) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# n={batch.n} d={batch.d} eta={_fmt(batch.eta)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(batch.d))
        for r, a, b in zip(batch.rewards, batch.phi, batch.phi_next):
            w.writerow([_fmt(r)] + [_fmt(v) for v in a] + [_fmt(v) for v in b])


def _parse_float(cell: str, line: int, col: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise DataFormatError(f"line {line}: column {col!r} is not a number: {cell!r}") from None


def load_trajectories(path) -> TrajectoryBatch:
    """Read a file written by :func:`save_trajectories`.

    Raises
    ------
    DataFormatError
        Bad preamble or header, wrong row length, non-numeric cell, or a row
        count that disagrees with the preamble.
    OSError
        The file cannot be read.
    """
    with open(path, newline="") as fh:
        text = fh.read()
    lines = text.splitlines()
    if not lines:
        raise DataFormatError("line 1: empty file, expected '# n=<n> d=<d> eta=<eta>'")
    m = _PREAMBLE.match(lines[0])
    if not m:
        raise DataFormatError(f"line 1: expected '# n=<n> d=<d> eta=<eta>', got {lines[0]!r}")
    try:
        n, d, eta = int(m.group(1)), int(m.group(2)), float(m.group(3))
    except ValueError:
        raise DataFormatError(f"line 1: unreadable metadata {lines[0]!r}") from None
    reader = csv.reader(io.StringIO("\n".join(lines[1:])))
    header = next(reader, None)
    expected = trajectory_header(d)
    if header != expected:
        raise DataFormatError(f"line 2: header does not match d={d}: {header!r}")
    width = len(expected)
    rows = []
    for k, row in enumerate(reader, start=3):
        if not row:
            continue
        if len(row) != width:
            raise DataFormatError(f"line {k}: expected {width} cells, got {len(row)}")
        rows.append([_parse_float(c, k, expected[j]) for j, c in enumerate(row)])
    if len(rows) != n:
        raise DataFormatError(f"line 1: preamble declares n={n} rows, file has {len(rows)}")
    arr = np.array(rows, dtype=float).reshape(n, width)
    try:
        return TrajectoryBatch(rewards=arr[:, 0], phi=arr[:, 1:1 + d], phi_next=arr[:, 1 + d:], eta=eta)
    except ValueError as exc:
        raise DataFormatError(f"line 1: {exc}") from None


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return _fmt(v)


def save_trace(path, rows, include_timing: bool = True) -> None:
    """Trace CSV with the :data:`TRACE_COLUMNS` header.

    Absent optional values become empty cells. ``include_timing=False`` leaves
    the ``wall_seconds`` cells empty so that reruns with the same seed
    produce identical files.
    """
    rows = getattr(rows, "rows", rows)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in rows:
            vals = list(r.as_tuple())
            if not include_timing:
                vals[-1] = None
            w.writerow([_cell(v) for v in vals])


def load_trace(path) -> list:
    """Rows of a trace CSV as :class:`TraceRow` objects (empty cells become ``None``)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_COLUMNS:
            raise DataFormatError(f"line 1: expected header {','.join(TRACE_COLUMNS)}, got {header!r}")
        out = []
        for k, row in enumerate(reader, start=2):
            if len(row) != len(TRACE_COLUMNS):
                raise DataFormatError(f"line {k}: expected {len(TRACE_COLUMNS)} cells, got {len(row)}")
            vals = {}
            for name, cell in zip(TRACE_COLUMNS, row):
                if cell == "":
                    vals[name] = None
                elif name in ("iter", "grad_evals"):
                    try:
                        vals[name] = int(cell)
                    except ValueError:
                        raise DataFormatError(f"line {k}: column {name!r} is not an integer: {cell!r}") from None
                else:
                    vals[name] = _parse_float(cell, k, name)
            if vals["iter"] is None or vals["grad_evals"] is None:
                raise DataFormatError(f"line {k}: iter and grad_evals are required")
            if vals["dist_sq"] is None:
                vals["dist_sq"] = math.nan
            if vals["wall_seconds"] is None:
                vals["wall_seconds"] = 0.0
            out.append(TraceRow(**vals))
    return out


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating, np.integer)):
        return _jsonable(v.item())
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def run_summary(result, alpha_hat=None) -> dict:
    """``{method, config, final_dist_sq, alpha_hat, grad_evals}`` plus status details."""
    config = result.config.to_dict()
    return _jsonable({
        "method": result.method,
        "config": config,
        "gamma": float(result.gamma),
        "final_dist_sq": float(result.final_dist_sq),
        "alpha_hat": None if alpha_hat is None else float(alpha_hat),
        "grad_evals": int(result.grad_evals),
        "status": result.status,
        "message": result.message,
    })


def save_summary(path, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


__all__ = [
    "DataFormatError",
    "Xoshiro256",
    "TrajectoryBatch",
    "FEATURE_MODELS",
    "generate_trajectories",
    "save_trajectories",
    "load_trajectories",
    "trajectory_header",
    "save_trace",
    "load_trace",
    "run_summary",
    "save_summary",
]
