"""Command line: ``saddle-vr {gen-data, run, compare, verify}``.

Exit codes: 0 success, 1 verification or convergence failure, 2 usage error,
3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataio, experiments
from .experiments import ExperimentSpec, ProblemError
from .solvers import METHODS, run

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("saddle_vr")


class UsageError(Exception):
    pass


def _gamma(text):
    if text == "auto":
        return text
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number or 'auto', got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"gamma must be positive, got {text}")
    return v


def _seeds(text):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}") from None


def _add_solver_flags(p, multi_method=False):
    p.add_argument("--problem", default="demo", help="problem descriptor, e.g. quadratic:n=100,mu=1e-3")
    p.add_argument("--data", help="trajectory CSV for the policy_eval family")
    if multi_method:
        p.add_argument("--methods", required=True, help="comma-separated methods")
    else:
        p.add_argument("--method", default="point_saga", help=f"one of {', '.join(METHODS)}")
    p.add_argument("--gamma", type=_gamma, default=None, help="step size or 'auto'")
    p.add_argument("--theta", type=float, default=None, help="afb extrapolation")
    p.add_argument("--tau", type=float, default=None, help="catalyst regularization strength")
    p.add_argument("--m", type=int, default=None, help="SVRG snapshot interval")
    p.add_argument("--epochs", type=float, default=10.0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--seeds", type=_seeds, default=None)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--target", type=float, default=None, help="stop once the metric reaches this value")
    p.add_argument("--metric", choices=("dist_sq", "primal_gap"), default="dist_sq")
    p.add_argument("--trace-every", type=int, default=None)
    p.add_argument("--start", default=None, help="start point: a scalar or comma-separated values")
    p.add_argument("--no-timing", action="store_true", help="leave wall_seconds empty for reproducible files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="saddle-vr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write synthetic trajectories")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--eta", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--feature-model", choices=dataio.FEATURE_MODELS, default="gaussian")
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("run", help="run one method, one trace per seed")
    _add_solver_flags(p)

    p = sub.add_parser("compare", help="tune and compare methods over seeds")
    _add_solver_flags(p, multi_method=True)
    p.add_argument("--no-tune", action="store_true", help="skip the step-size race")
    p.add_argument("--compare-target", type=float, default=1e-6,
                   help="metric level used for tuning and the summary (default 1e-6)")

    p = sub.add_parser("verify", help="run the inequality suites")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--negative-control", action="store_true")
    p.add_argument("--out", default=None, help="JSON report path")
    return parser


def _overrides(args) -> dict:
    out = {}
    for name in ("gamma", "theta", "tau", "m"):
        v = getattr(args, name)
        if v is not None:
            out[name] = v
    for name, key in (("target", "target"), ("trace_every", "trace_every")):
        v = getattr(args, name)
        if v is not None:
            out[key] = v
    out["target_metric"] = args.metric
    return out


def _start(problem, text):
    if text is None:
        return None
    try:
        vals = np.array([float(s) for s in text.split(",")])
    except ValueError:
        raise UsageError(f"--start needs numbers, got {text!r}") from None
    if vals.size == 1:
        return np.full(problem.dim, vals[0])
    if vals.size != problem.dim:
        raise UsageError(f"--start has {vals.size} values, problem dimension is {problem.dim}")
    return vals


def _seed_list(args):
    if args.seeds is not None:
        return args.seeds
    return [args.seed if args.seed is not None else 0]


def cmd_gen_data(args) -> int:
    try:
        batch = dataio.generate_trajectories(args.seed, args.n, args.d, args.eta,
                                             args.feature_model, noise=args.noise)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    dataio.save_trajectories(args.out, batch)
    print(f"wrote {batch.n} rows (d={batch.d}) to {args.out}")
    return EXIT_OK


def _spec(args, methods) -> ExperimentSpec:
    overrides = _overrides(args)
    try:
        spec = ExperimentSpec(problem=args.problem, methods=methods, seeds=_seed_list(args),
                              epochs=args.epochs, overrides={m: overrides for m in methods},
                              data=args.data, out=args.out)
        for m in methods:
            spec.config(m, spec.seeds[0])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return spec


def cmd_run(args) -> int:
    spec = _spec(args, [args.method])
    problem = experiments.build_problem(spec.problem, spec.data)
    start = _start(problem, args.start)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    for seed in spec.seeds:
        config = spec.config(args.method, seed)
        log.info(experiments.resolved_gamma_note(problem, config))
        result = run(problem, config, start=start)
        summary = dataio.run_summary(result, experiments.alpha_hat(result))
        stem = out / f"{args.method}_seed{seed}"
        dataio.save_trace(stem.with_suffix(".csv"), result.rows, include_timing=not args.no_timing)
        dataio.save_summary(stem.with_suffix(".json"), summary)
        print(f"{args.method} seed={seed} gamma={result.gamma!r} iterations={result.rows[-1].iter} "
              f"grad_evals={result.grad_evals} final_dist_sq={result.final_dist_sq:.6e} status={result.status}")
        if result.diverged:
            print(f"diverged: {result.message}", file=sys.stderr)
            status = EXIT_FAIL
    return status


def cmd_compare(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if len(methods) < 2:
        raise UsageError("compare needs at least two methods")
    spec = _spec(args, methods)
    problem = experiments.build_problem(spec.problem, spec.data)
    if args.start is not None:
        raise UsageError("--start is not supported by compare")
    comp = experiments.compare(problem, spec, do_tune=not args.no_tune, target=args.compare_target,
                               metric=args.metric, include_timing=not args.no_timing)
    header, rows = comp.summary_rows()
    print(" ".join(f"{h:>24s}" for h in header))
    for row in rows:
        print(" ".join(f"{'' if v is None else v!s:>24s}" for v in row))
    if comp.any_diverged:
        print("at least one run diverged; see the per-run JSON summaries", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.trials < 0:
        raise UsageError("--trials must be non-negative")
    report = experiments.verify(args.trials, args.seed, args.negative_control)
    for s in report["suites"]:
        tag = "control" if s["negative_control"] else ("PASS" if s["passed"] else "FAIL")
        worst = "n/a" if s["worst_relative_slack"] is None else f"{s['worst_relative_slack']:.3e}"
        print(f"{tag:8s} {s['name']:28s} trials={s['trials']} failed={s['failed']} worst_slack={worst}")
    print("all suites passed" if report["passed"] else "verification FAILED")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    return EXIT_OK if report["passed"] else EXIT_FAIL


COMMANDS = {"gen-data": cmd_gen_data, "run": cmd_run, "compare": cmd_compare, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) or args.command == "run"
                        else logging.WARNING, format="%(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ProblemError) as exc:
        parser.print_usage(sys.stderr)
        print(f"saddle-vr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except dataio.DataFormatError as exc:
        print(f"saddle-vr: malformed input: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"saddle-vr: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
