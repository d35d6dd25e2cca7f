"""Command line: ``simulate``, ``bounds`` and ``summarize``.

Exit codes: 0 violation-free completion, 1 completed run or log with
violations (or an infeasible/empty-set abort), 2 invalid input files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .io import read_csv, write_csv, write_model_set
from .scenario import ScenarioError, load_bounds_problem, validate_scenario
from .sim import Metrics, simulate, summarize
from .uncertainty import assemble_initial_set, channel_bounds, max_input_magnitude

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2


def _print_metrics(m: Metrics, status: str = "ok") -> None:
    print(f"status               {status}")
    print(f"steps                {m.steps}")
    print(f"tracking RMSE        {m.rmse:.6g}")
    print(f"max residual         {m.max_residual:.6g}")
    print(f"infeasible steps     {m.infeasible_steps}")
    print(f"membership failures  {m.membership_violations}")
    print(f"class-bound failures {m.class_violations}")
    print(f"final sum xi         {m.final_xi_sum:.6g}")
    for stage in ("identify", "fhocp", "explore"):
        val = getattr(m, f"mean_time_{stage}")
        if np.isfinite(val):
            print(f"mean time {stage:<10} {val * 1e3:.3f} ms")
    print("violation-free" if m.violation_free else "VIOLATIONS")


def cmd_simulate(args) -> int:
    try:
        sc = validate_scenario(args.scenario)
    except ScenarioError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runlog = simulate(sc, explore=False if args.no_explore else None, seed=args.seed)
    write_csv(out / "log.csv", runlog.columns(), runlog.rows)
    write_csv(out / "timing.csv", runlog.timing_columns(), runlog.timing)
    completed = runlog.status == "ok" and len(runlog.rows) == sc.T
    m = summarize(runlog.as_arrays(), read_csv(out / "timing.csv"), completed=completed)
    summary = dict(asdict(m), status=runlog.status, message=runlog.message, violation_free=m.violation_free,
                   scenario=sc.name, seed=sc.seed if args.seed is None else args.seed)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=float) + "\n")
    _print_metrics(m, runlog.status)
    if runlog.message:
        print(runlog.message, file=sys.stderr)
    return EXIT_OK if m.violation_free else EXIT_VIOLATION


def cmd_bounds(args) -> int:
    try:
        fam, C, g, grid, channels = load_bounds_problem(args.plant)
    except (ScenarioError, OSError) as exc:
        for e in getattr(exc, "errors", [str(exc)]):
            print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    n_u = C.shape[1]
    n_y = max(j for j, _ in channels) + 1
    try:
        u_bar = [max_input_magnitude(C, g, i) for i in range(n_u)]
    except ValueError as exc:
        print(f"error: inputs: {exc}", file=sys.stderr)
        return EXIT_INPUT
    table = [[channel_bounds(channels[(j, i)], fam, u_bar[i], grid) for i in range(n_u)] for j in range(n_y)]
    mset, _ = assemble_initial_set(table, np.zeros(n_y))
    eta = np.array([[cb.eta_bar for cb in row] for row in table])
    write_model_set(args.out, mset, n_u, fam.m, eta_bar=eta)
    print(f"wrote {args.out}: n_y={n_y} n_u={n_u} m={fam.m}")
    for j in range(n_y):
        print(f"  output {j + 1}: eta_bar sum {eta[j].sum():.6g}")
    return EXIT_OK


def cmd_summarize(args) -> int:
    path = Path(args.log)
    try:
        data = read_csv(path)
    except (OSError, ValueError, StopIteration) as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    timing_path = path.with_name("timing.csv")
    timing = read_csv(timing_path) if timing_path.exists() else None
    completed = True
    status = "ok"
    summ = path.with_name("summary.json")
    if summ.exists():
        rec = json.loads(summ.read_text())
        status = rec.get("status", "ok")
        completed = bool(rec.get("completed", True))
    m = summarize(data, timing, completed=completed)
    _print_metrics(m, status)
    return EXIT_OK if m.violation_free else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adaptive-mpc", description="Adaptive MPC with set-membership identification.")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver fallbacks and warnings")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a closed-loop scenario")
    s.add_argument("scenario", help="scenario TOML file")
    s.add_argument("--out", required=True, help="output directory (log.csv, timing.csv, summary.json)")
    s.add_argument("--no-explore", action="store_true", help="disable the exploration stage")
    s.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bounds", help="initial model set from an uncertain plant description")
    b.add_argument("plant", help="plant TOML file")
    b.add_argument("--out", required=True, help="model-set file to write")
    b.set_defaults(func=cmd_bounds)

    m = sub.add_parser("summarize", help="metrics of a run log")
    m.add_argument("log", help="log.csv written by simulate")
    m.set_defaults(func=cmd_summarize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
