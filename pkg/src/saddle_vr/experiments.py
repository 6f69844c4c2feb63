"""Experiment plumbing shared by the command line: problems, runs, comparisons, verification.

Problem descriptors are ``family`` or ``family:key=value,key=value``:

========================  =====================================================
``demo``                  ``x^2/2 + xy - y^2/2`` (n=1)
``separable``             ``x^2/2 - y^2/2`` shifted by ``shift`` (n=1)
``two_component``         two 1-D components with analytic operators
``quadratic``             random instance; ``n d_x d_y mu kappa sym seed offset``
``nonsmooth``             separable l1 instance; ``n d_x d_y mu l1 seed``
``policy_eval``           EM-MSPBE from ``--data`` or from generated
                          trajectories; ``rho lam n d eta seed model``
========================  =====================================================
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataio, diagnostics
from .core import default_step_size, rate_constants
from .problems import (
    PolicyEvalProblem,
    PolicyEvalSpec,
    bilinear_demo,
    random_nonsmooth,
    random_quadratic,
    separable_demo,
    two_component_demo,
)
from .solvers import METHODS, STEP_GRID, TAU_GRID, SolverConfig, run, tune

log = logging.getLogger("saddle_vr")

THREADS_ENV = "SADDLE_VR_THREADS"

_DEFAULTS = {
    "demo": {},
    "separable": {"shift": 1.0},
    "two_component": {},
    "quadratic": {"n": 100, "d_x": 5, "d_y": 5, "mu": 1e-3, "kappa": 1e3, "sym": 0.0,
                  "seed": 0, "offset": 1.0},
    "nonsmooth": {"n": 10, "d_x": 1, "d_y": 1, "mu": 1.0, "l1": 1.0, "seed": 0},
    "policy_eval": {"rho": 1e-5, "lam": 1e-5, "n": 5000, "d": 50, "eta": 0.95, "seed": 0,
                    "model": "gaussian"},
}
_INTS = {"n", "d_x", "d_y", "d", "seed"}


class ProblemError(ValueError):
    """Unknown family or bad parameters in a problem descriptor."""


def parse_problem(descriptor: str) -> tuple:
    """``(family, params)`` with defaults filled in."""
    family, _, rest = descriptor.partition(":")
    family = family.strip()
    if family not in _DEFAULTS:
        raise ProblemError(f"unknown problem family {family!r}; choose from {', '.join(_DEFAULTS)}")
    params = dict(_DEFAULTS[family])
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq or key not in params:
            raise ProblemError(f"bad parameter {item!r} for {family}; known: {', '.join(params) or 'none'}")
        if key == "model":
            params[key] = value
            continue
        try:
            params[key] = int(value) if key in _INTS else float(value)
        except ValueError:
            raise ProblemError(f"parameter {key} needs a number, got {value!r}") from None
    return family, params


def build_problem(descriptor: str, data=None):
    """Instantiate a problem from a descriptor; ``data`` is a trajectory CSV path."""
    family, p = parse_problem(descriptor)
    if data is not None and family != "policy_eval":
        raise ProblemError("--data only applies to the policy_eval family")
    try:
        if family == "demo":
            return bilinear_demo()
        if family == "separable":
            return separable_demo(p["shift"])
        if family == "two_component":
            return two_component_demo()
        if family == "quadratic":
            return random_quadratic(p["n"], p["d_x"], p["d_y"], p["mu"], p["kappa"], rng=p["seed"],
                                    sym_fraction=p["sym"], offset_scale=p["offset"])
        if family == "nonsmooth":
            return random_nonsmooth(p["n"], p["d_x"], p["d_y"], mu=p["mu"], rng=p["seed"],
                                    l1_scale=p["l1"])
        batch = (dataio.load_trajectories(data) if data is not None else
                 dataio.generate_trajectories(p["seed"], p["n"], p["d"], p["eta"], p["model"]))
        return PolicyEvalProblem(PolicyEvalSpec.from_trajectories(batch, p["rho"], p["lam"]))
    except (dataio.DataFormatError, OSError):
        raise
    except ValueError as exc:
        raise ProblemError(str(exc)) from None


@dataclass
class ExperimentSpec:
    """Problem, methods with per-method overrides, seeds and output directory."""

    problem: str
    methods: list
    seeds: list = field(default_factory=lambda: [0])
    epochs: float = 10
    overrides: dict = field(default_factory=dict)
    data: str = None
    out: str = "."

    def __post_init__(self):
        if not self.methods:
            raise ValueError("an experiment needs at least one method")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError(f"seeds must be distinct, got {self.seeds}")
        parse_problem(self.problem)

    def labels(self) -> list:
        """Column labels; a repeated method gets a ``_2``, ``_3`` suffix."""
        seen, out = {}, []
        for m in self.methods:
            seen[m] = seen.get(m, 0) + 1
            out.append(m if seen[m] == 1 else f"{m}_{seen[m]}")
        return out

    def config(self, method: str, seed: int) -> SolverConfig:
        base = {"method": method, "epochs": self.epochs, "seed": seed}
        base.update(self.overrides.get(method, {}))
        return SolverConfig(**base)


def alpha_hat(result):
    """Fitted contraction of ``dist_sq``, or None when the trace is too short or has zeros."""
    rows = [r for r in result.rows if r.dist_sq == r.dist_sq and r.dist_sq > 0]
    try:
        return diagnostics.estimate_rate(rows)
    except ValueError:
        return None


def run_cell(problem, config: SolverConfig, out_dir=None, label=None, include_timing=True):
    """One (method, seed) run; writes ``<label>_seed<k>.csv`` and ``.json`` when ``out_dir`` is set."""
    result = run(problem, config)
    summary = dataio.run_summary(result, alpha_hat(result))
    if out_dir is not None:
        stem = Path(out_dir) / f"{label or config.method}_seed{config.seed}"
        dataio.save_trace(stem.with_suffix(".csv"), result.rows, include_timing=include_timing)
        dataio.save_summary(stem.with_suffix(".json"), summary)
    return result, summary


def _cell_job(args):
    problem, config, out_dir, label, include_timing = args
    return run_cell(problem, config, out_dir, label, include_timing)


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None


def run_cells(jobs, workers=None):
    """Run ``(problem, config, out_dir, label, include_timing)`` jobs, in parallel if allowed."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [_cell_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_cell_job, jobs))


def resolved_gamma_note(problem, config: SolverConfig) -> str:
    """Human-readable step size, with the analysis value spelled out for ``auto``."""
    if config.gamma == "auto" and config.method == "point_saga":
        rc = default_step_size(problem.constants)
        return f"gamma=auto -> {rc.gamma!r} (alpha={rc.alpha!r}, c={rc.c!r})"
    return f"gamma={config.gamma}"


def aligned_table(results_by_label: dict, metric: str, n: int) -> tuple:
    """Seed-averaged metric on a common grad_evals grid.

    Each run is read as a step function of grad_evals that holds its last
    recorded value after it stops. Returns ``(header, rows)``.
    """
    points = sorted({r.grad_evals for runs in results_by_label.values() for res in runs for r in res.rows})
    header = ["grad_evals", "epoch"]
    cols = []
    for label, runs in results_by_label.items():
        header += [f"{label}_mean", f"{label}_min", f"{label}_max"]
        per_seed = []
        for res in runs:
            ev = np.array([r.grad_evals for r in res.rows], dtype=float)
            val = res.metric(metric)
            idx = np.searchsorted(ev, points, side="right") - 1
            col = np.where(idx >= 0, val[np.clip(idx, 0, None)], np.nan)
            per_seed.append(col)
        cols.append(np.array(per_seed))
    rows = []
    for k, e in enumerate(points):
        row = [int(e), e / n]
        for arr in cols:
            v = arr[:, k]
            if np.any(np.isnan(v)):
                row += [None, None, None]
            else:
                row += [float(v.mean()), float(v.min()), float(v.max())]
        rows.append(row)
    return header, rows


def write_rows(path, header, rows) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])


@dataclass
class Comparison:
    labels: list
    configs: dict
    results: dict
    target: float
    metric: str

    def evals_to_target(self) -> dict:
        return {lab: [r.evals_to(self.target, self.metric) for r in self.results[lab]] for lab in self.labels}

    def median_evals(self) -> dict:
        """Median evals to target per label; runs that miss it count as infinite."""
        out = {}
        for lab, ev in self.evals_to_target().items():
            out[lab] = float(np.median([math.inf if e is None else e for e in ev]))
        return out

    def summary_rows(self):
        header = ["method", "gamma", "tau", "median_evals_to_target", "seeds_reached", "diverged"]
        rows = []
        med = self.median_evals()
        for lab in self.labels:
            cfg, runs = self.configs[lab], self.results[lab]
            ev = [r.evals_to(self.target, self.metric) for r in runs]
            rows.append([
                lab, runs[0].gamma, cfg.tau if cfg.tau is not None else runs[0].extras.get("tau"),
                None if math.isinf(med[lab]) else med[lab],
                sum(e is not None for e in ev), sum(r.diverged for r in runs),
            ])
        return header, rows

    @property
    def any_diverged(self) -> bool:
        return any(r.diverged for runs in self.results.values() for r in runs)


def compare(problem, spec: ExperimentSpec, do_tune=True, target=1e-6, metric="dist_sq",
            grid=STEP_GRID, tau_grid=TAU_GRID, include_timing=True, write=True, workers=None):
    """Tune each method on the first seed, then run every (method, seed) cell.

    Tuning races the step-size grid (and the catalyst strength grid) for the
    fewest evaluations to ``target``; methods with an explicit ``gamma``
    override are not retuned.
    """
    labels = spec.labels()
    configs = {}
    for lab, method in zip(labels, spec.methods):
        cfg = spec.config(method, spec.seeds[0]).with_(target_metric=metric)
        explicit = "gamma" in spec.overrides.get(method, {})
        if do_tune and not explicit and method != "point_saga_nonsmooth":
            cfg, _ = tune(problem, cfg, grid=grid, tau_grid=tau_grid, target=target, metric=metric)
            log.info("%s tuned: gamma=%r tau=%r", lab, cfg.gamma, cfg.tau)
        configs[lab] = cfg
    out_dir = Path(spec.out) if write else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(problem, configs[lab].with_(seed=s), out_dir, lab, include_timing)
            for lab in labels for s in spec.seeds]
    done = run_cells(jobs, workers)
    results = {lab: [] for lab in labels}
    for (_, _, _, lab, _), (res, _) in zip(jobs, done):
        results[lab].append(res)
    comp = Comparison(labels=labels, configs=configs, results=results, target=target, metric=metric)
    if out_dir is not None:
        header, rows = aligned_table(results, metric, problem.n)
        write_rows(out_dir / "compare.csv", header, rows)
        write_rows(out_dir / "compare_summary.csv", *comp.summary_rows())
    return comp


# --- verification suites -------------------------------------------------


def random_component(rng: np.random.Generator):
    """Single-component quadratic with mu, kappa and dimensions drawn at random.

    ``mu`` is log-uniform on ``[1e-3, 1e3]`` and ``kappa`` on ``[1, 1e4]``.
    """
    mu = 10.0 ** rng.uniform(-3, 3)
    kappa = 10.0 ** rng.uniform(0, 4)
    d_x, d_y = (int(v) for v in rng.integers(1, 4, size=2))
    sym = float(rng.uniform())
    return random_quadratic(1, d_x, d_y, mu, kappa, rng=rng, sym_fraction=sym)


def _spec_dict(problem) -> dict:
    spec = getattr(problem, "spec", None)
    if spec is None:
        return {"type": type(problem).__name__}
    out = {"type": type(problem).__name__}
    for name in ("P", "Q", "M", "a", "b"):
        if hasattr(spec, name):
            out[name] = np.asarray(getattr(spec, name)).tolist()
    return out


def _suite_result(name, trials, checks, instances, controls=False):
    failed = [dict(check.to_dict(), instance=inst) for check, inst in zip(checks, instances) if not check.passed]
    worst = min((c.slack / (1.0 + abs(c.rhs)) for c in checks), default=None)
    return {"name": name, "trials": trials, "failed": len(failed), "passed": not failed or controls,
            "worst_relative_slack": worst, "failures": failed[:5], "negative_control": controls}


def verify(trials: int = 1000, seed: int = 0, negative_control: bool = False) -> dict:
    """Run the inequality suites; ``report["passed"]`` is True iff every real suite passed.

    Suites: strong monotonicity, prox non-expansiveness and the strengthened
    firm non-expansiveness on random quadratic components, plus the exact
    one-step Lyapunov contraction along Point SAGA runs on a two-component
    problem. ``negative_control`` adds the contraction check with a step ten
    times the analysis value, whose failures are reported but not counted.
    """
    rng = np.random.default_rng(seed)
    suites = []
    checks = {"lemma1": [], "lemma2": [], "theorem1": []}
    inst = {"lemma1": [], "lemma2": [], "theorem1": []}
    fns = {"lemma1": diagnostics.check_lemma1, "lemma2": diagnostics.check_lemma2,
           "theorem1": diagnostics.check_theorem1}
    for _ in range(trials):
        problem = random_component(rng)
        gamma = 10.0 ** rng.uniform(-3, 3)
        scale = 10.0 ** rng.uniform(-2, 2)
        pair = (scale * rng.standard_normal(problem.dim), scale * rng.standard_normal(problem.dim))
        for name, fn in fns.items():
            c = fn(problem, 0, gamma, pair)
            checks[name].append(c)
            inst[name].append(None if c.passed else {
                "problem": _spec_dict(problem), "i": 0, "gamma": gamma,
                "p1": pair[0].tolist(), "p2": pair[1].tolist(),
            })
    for name in fns:
        suites.append(_suite_result(name, trials, checks[name], inst[name]))
    suites.append(_contraction_suite(trials, rng, 1.0, "contraction"))
    if negative_control:
        suites.append(_contraction_suite(trials, rng, 10.0, "contraction_oversized_step", controls=True))
    return {"passed": all(s["passed"] for s in suites), "trials": trials, "seed": seed, "suites": suites}


def _contraction_suite(trials, rng, factor, name, controls=False):
    checks, instances = [], []
    if trials > 0:
        problem = random_quadratic(2, 2, 2, 1.0, 10.0, rng=rng)
        base = default_step_size(problem.constants)
        rc = base if factor == 1.0 else rate_constants(problem.constants, factor * base.gamma)
        if not math.isfinite(rc.c):
            rc = type(rc)(gamma=rc.gamma, alpha=rc.alpha, c=base.c)
        states = diagnostics.point_saga_states(problem, rc.gamma, trials,
                                               start=rng.standard_normal(problem.dim), rng=rng)
        z_star = problem.saddle_point()
        for s in states:
            c = diagnostics.check_contraction(problem, s, rc, z_star)
            checks.append(c)
            instances.append(None if c.passed else {
                "problem": _spec_dict(problem), "gamma": rc.gamma, "alpha": rc.alpha, "c": rc.c,
                "point": s.point.tolist(), "table": s.table.entries.tolist(),
            })
    return _suite_result(name, trials, checks, instances, controls)
