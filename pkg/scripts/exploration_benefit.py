"""Paired comparison of the final sum of Chebyshev radii with and without exploration.

Runs one scenario for several seeds, once with the exploration stage and once
without, and reports the per-seed values, the medians and the effect size
(median of paired differences, and Cohen's d of the differences; negative
means exploration shrank the model set more).

Usage:
    python3 scripts/exploration_benefit.py [scenario.toml | constant] [--seeds 10] [--T 100] [--out results.csv]

The default scenario is ``scenarios/siso_laguerre.toml``; ``constant`` selects
a built-in poorly-excited variant (constant set-point, random disturbance).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from adaptive_mpc import BasisFamily, ConstraintSet, ControllerConfig, ModelSet, Scenario
from adaptive_mpc.io import write_csv
from adaptive_mpc.scenario import validate_scenario
from adaptive_mpc.sim import CoefficientPlant, SignalSpec, simulate

DEFAULT_SCENARIO = Path(__file__).resolve().parents[1] / "scenarios" / "siso_laguerre.toml"


def constant_reference_scenario(T: int = 100, seed: int = 0) -> Scenario:
    """SISO Laguerre plant with a wide prior and a constant reference.

    A constant set-point excites the plant poorly, which is where an
    information-seeking stage might be expected to pay off. Defaults are our own.
    """
    fam = BasisFamily("laguerre", 0.6, 3)
    H = np.array([[0.9, 0.35, -0.15]])
    cons = ConstraintSet.boxes([1.0], [0.4], [1.5], [0.02], [0.01])
    cfg = ControllerConfig(N=8, Q=[[1.0]], S=[[0.01]], R=[[0.05]], r_explore=1.5)
    F0 = ModelSet.box(H - 0.5, H + 0.5)
    ref = np.full((T + cfg.N + 1, 1), 0.6)
    return Scenario(family=fam, constraints=cons, controller=cfg, initial_set=F0, plant=CoefficientPlant(H, fam, 1),
                    reference=ref, T=T, disturbance=SignalSpec("uniform-random"), noise=SignalSpec("uniform-random"),
                    seed=seed, name="constant-reference")


def load(which, T: int) -> Scenario:
    if str(which) == "constant":
        return constant_reference_scenario(T)
    return validate_scenario(which).with_changes(T=T)


def final_xi(sc: Scenario, explore: bool, seed: int) -> float:
    log = simulate(sc, explore=explore, seed=seed)
    if log.status != "ok":
        raise RuntimeError(f"seed {seed}: {log.message}")
    d = log.as_arrays()
    return float(sum(d[f"xi_{j + 1}"][-1] for j in range(sc.constraints.n_y)))


def paired_study(sc: Scenario, seeds):
    """Per-seed ``(seed, xi_explore, xi_plain)`` rows and summary statistics."""
    arr = np.array([(s, final_xi(sc, True, s), final_xi(sc, False, s)) for s in seeds], dtype=float)
    diff = arr[:, 1] - arr[:, 2]
    sd = diff.std(ddof=1) if len(diff) > 1 else 0.0
    stats = {
        "median_explore": float(np.median(arr[:, 1])),
        "median_plain": float(np.median(arr[:, 2])),
        "median_diff": float(np.median(diff)),
        "cohens_d": float(diff.mean() / sd) if sd > 0 else float("nan"),
        "wins": int(np.sum(diff <= 0)),
    }
    return arr, stats


def report(arr, st) -> str:
    lines = [f"{'seed':>4} {'xi explore':>12} {'xi plain':>12}"]
    lines += [f"{int(s):>4} {a:12.5g} {b:12.5g}" for s, a, b in arr]
    lines += [
        f"median with exploration    {st['median_explore']:.5g}",
        f"median without exploration {st['median_plain']:.5g}",
        f"median paired difference   {st['median_diff']:.5g}",
        f"Cohen's d (paired)         {st['cohens_d']:.3g}",
        f"exploration <= plain on {st['wins']}/{len(arr)} seeds",
    ]
    return "\n".join(lines)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("scenario", nargs="?", default=str(DEFAULT_SCENARIO))
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--T", type=int, default=100)
    ap.add_argument("--out", default=None, help="optional CSV of per-seed results")
    args = ap.parse_args(argv)
    t0 = time.perf_counter()
    arr, st = paired_study(load(args.scenario, args.T), range(args.seeds))
    print(report(arr, st))
    print(f"({time.perf_counter() - t0:.1f} s)")
    if args.out:
        write_csv(args.out, ["seed", "xi_explore", "xi_plain"], arr.tolist())
    return 0


if __name__ == "__main__":
    sys.exit(main())
