"""Command-line interface.

    mixedhk run SCENARIO [--out FILE] [--format jsonl|csv] [--stop-on-termination]
    mixedhk mc SCENARIO --runs R [--horizon H] [--csv FILE]
    mixedhk analyze TRAJECTORY [--epsilon EPS]
    mixedhk demo {merge,depart,async-reduction,no-termination}

Exit codes: 0 success, 1 validation failure, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .dynamics import OpinionState, StubbornnessAssignment, detect_merge, step
from .errors import ConfigurationError, HypothesisViolation, UsageError
from .montecarlo import run_ensemble
from .scenario import analyze_trajectory, export_trajectory, load_scenario, load_trajectory
from .schedules import ScheduleSpec, derive_seed
from .stopping import detect_termination, stopping_report
from .trajectory import simulate

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2

# float64 resolves alpha = 1 - 2^-t < 1 and the resulting moves up to about t = 52
NO_TERMINATION_HORIZON = 50


def _emit(obj):
    print(json.dumps(obj, indent=2))


def cmd_run(args):
    sc = load_scenario(args.scenario)
    seed = derive_seed(sc.schedule.seed, 0)
    traj = simulate(sc.initial_state(0), sc.schedule, sc.horizon, seed=seed, stop_on_termination=args.stop_on_termination)
    if args.out:
        export_trajectory(traj, args.out, args.format)
    summary = {"steps": traj.horizon, "final_opinions": traj.states[-1].tolist()}
    if "energy" in sc.outputs:
        summary["Z_initial"] = float(traj.energies[0])
        summary["Z_final"] = float(traj.energies[-1])
    if "stopping_report" in sc.outputs:
        summary["stopping_report"] = stopping_report(traj, sc.delta, (4, sc.m_max)).to_dict()
    _emit(summary)
    return EXIT_OK


def cmd_mc(args):
    sc = load_scenario(args.scenario)
    res = run_ensemble(sc, args.runs, args.horizon)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            rows = list(res.rows())
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for r in rows:
                w.writerow({k: "" if v is None else v for k, v in r.items()})
    _emit(res.summary())
    return EXIT_OK


def cmd_analyze(args):
    traj, rows = load_trajectory(args.trajectory, args.epsilon)
    report = analyze_trajectory(traj, rows)
    _emit(
        {
            "steps": report.steps,
            "violations": len(report.violations),
            "details": [{"t": t, "problem": msg} for t, msg in report.violations[:50]],
        }
    )
    return EXIT_OK if report.ok else EXIT_VALIDATION


def _fmt_state(x):
    x = np.asarray(x)
    if x.shape[1] == 1:
        return "(" + ", ".join(repr(float(v)) for v in x[:, 0]) + ")"
    return repr(x.tolist())


def demo_merge():
    eps = 0.5
    s0 = OpinionState([0.0, eps], eps)
    s1 = step(s0, StubbornnessAssignment([0.0, 0.0]))
    print(f"epsilon = {eps}")
    print(f"x(0) = {_fmt_state(s0.opinions)}")
    print(f"x(1) = {_fmt_state(s1.opinions)}")
    for i, j in detect_merge(s0, s1):
        print(f"merge event at t=1: agents {i} and {j}")
    return EXIT_OK


def demo_depart():
    s0 = OpinionState([0.0, 0.0, 1.0], 1.0)
    s1 = step(s0, StubbornnessAssignment([1.0, 0.0, 1.0]))
    print("epsilon = 1.0, alpha(0) = (1, 0, 1)")
    print(f"x(0) = {_fmt_state(s0.opinions)}")
    print(f"x(1) = {_fmt_state(s1.opinions)}")
    same0 = s0.opinions[0, 0] == s0.opinions[1, 0]
    same1 = s1.opinions[0, 0] == s1.opinions[1, 0]
    print(f"agents 0 and 1 equal at t=0: {same0}; equal at t=1: {same1}")
    return EXIT_OK if same0 and not same1 else EXIT_RUNTIME


def demo_async_reduction(n=5, steps=500, seed=2024):
    rng = np.random.default_rng(seed)
    x0 = OpinionState(rng.uniform(0, 1, n), 0.3)
    a = simulate(x0, ScheduleSpec.asynchronous(seed), steps)
    b = simulate(x0, ScheduleSpec.singletons(n, 0.0, seed), steps)
    same = np.array_equal(a.states, b.states) and np.array_equal(a.alphas, b.alphas)
    print(f"n = {n}, {steps} steps, seed {seed}")
    print(f"asynchronous final x = {a.states[-1].ravel().tolist()}")
    print(f"singleton-support final x = {b.states[-1].ravel().tolist()}")
    print(f"trajectories bitwise identical: {same}")
    return EXIT_OK if same else EXIT_RUNTIME


def demo_no_termination(horizon=NO_TERMINATION_HORIZON):
    x0 = OpinionState([0.0, 0.3, 0.7], 0.5)
    rows = [[1.0 - 2.0**-t] * 3 for t in range(horizon)]
    traj = simulate(x0, ScheduleSpec.from_rows(rows), horizon)
    moved = [not np.array_equal(traj.states[t], traj.states[t + 1]) for t in range(horizon)]
    term = detect_termination(traj)
    print(f"alpha_i(t) = 1 - 2^-t, x(0) = {_fmt_state(x0.opinions)}, epsilon = 0.5, {horizon} steps")
    print(f"x({horizon}) = {_fmt_state(traj.states[-1])}")
    print(f"state changed at every step: {all(moved)}")
    print(f"termination time: {'not reached' if term is None else term}")
    return EXIT_OK if term is None else EXIT_RUNTIME


DEMOS = {
    "merge": demo_merge,
    "depart": demo_depart,
    "async-reduction": demo_async_reduction,
    "no-termination": demo_no_termination,
}


def build_parser():
    p = argparse.ArgumentParser(prog="mixedhk", description="Mixed Hegselmann-Krause simulator and checker")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one trajectory")
    r.add_argument("scenario")
    r.add_argument("--out", help="trajectory export path")
    r.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    r.add_argument("--stop-on-termination", action="store_true", help="stop once the state is a fixed point")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("mc", help="Monte Carlo ensemble of stopping times")
    m.add_argument("scenario")
    m.add_argument("--runs", type=int, required=True)
    m.add_argument("--horizon", type=int, default=None)
    m.add_argument("--csv", help="per-run CSV output path")
    m.set_defaults(func=cmd_mc)

    a = sub.add_parser("analyze", help="recheck a stored trajectory")
    a.add_argument("trajectory")
    a.add_argument("--epsilon", type=float, default=None, help="required for CSV input")
    a.set_defaults(func=cmd_analyze)

    d = sub.add_parser("demo", help="built-in examples")
    d.add_argument("name", choices=sorted(DEMOS))
    d.set_defaults(func=lambda args: DEMOS[args.name]())
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    try:
        return args.func(args)
    except (ConfigurationError, HypothesisViolation, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
