#!/usr/bin/env python3
"""
Boundary-step battery on random cubic models.

Part 1 solves the sphere-boundary subproblem for seeded cubic Taylor
models across a range of dimensions and records the full certificate for
each instance: multiplier, objective value, Lagrangian gradient norm, the
smallest eigenvalue of the projected second-order matrix, and iteration
counts.

Part 2 sweeps the radius on one larger instance and records how the
multiplier and the boundary minimum move as the ball grows.

Produces (under --outdir, default results/):
  boundary_battery.csv   one row per (seed, n) instance
  boundary_sweep.csv     one row per radius
"""

import argparse
import csv
import time
from pathlib import Path

import numpy as np

from specteig import (BoundaryConfig, check_second_order, random_cubic,
                      solve_boundary)

BATTERY_SCALES = (80.0, 80.0, 80.0)
SWEEP_SCALES = (200.0, 8.0, 2.0)


def run_battery(seeds, dims, delta, outpath: Path):
    rows = []
    for seed in seeds:
        for n in dims:
            poly = random_cubic(n, seed, BATTERY_SCALES)
            t0 = time.perf_counter()
            res = solve_boundary(poly, delta, BoundaryConfig())
            wall = time.perf_counter() - t0
            min_eig, proj_pd = check_second_order(poly, res.s, res.lambda_)
            rows.append({
                "seed": seed, "n": n, "converged": int(res.converged),
                "lambda": f"{res.lambda_:.10g}",
                "value": f"{res.value:.10g}",
                "grad_norm": f"{res.grad_lagrangian_norm:.3e}",
                "proj_min_eig": f"{min_eig:.6g}",
                "proj_PD": int(proj_pd),
                "inner_iters": res.inner_iters,
                "outer_iters": res.outer_iters,
                "time_s": f"{wall:.3f}",
            })
            flag = "ok" if res.converged and proj_pd else "CHECK"
            print(f"seed={seed} n={n:2d} lambda={res.lambda_:12.4f} "
                  f"value={res.value:14.4f} grad={res.grad_lagrangian_norm:.2e} "
                  f"[{flag}]")
    with open(outpath, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    bad = sum(1 for r in rows if not r["converged"])
    print(f"battery: {len(rows) - bad}/{len(rows)} converged "
          f"-> {outpath}")


def run_sweep(n, seed, deltas, outpath: Path):
    poly = random_cubic(n, seed, SWEEP_SCALES)
    rows = []
    for delta in deltas:
        res = solve_boundary(poly, float(delta), BoundaryConfig())
        rows.append({
            "delta": delta,
            "lambda": f"{res.lambda_:.10g}",
            "value": f"{res.value:.10g}",
            "grad_norm": f"{res.grad_lagrangian_norm:.3e}",
            "converged": int(res.converged),
        })
        print(f"delta={delta:4.1f} lambda={res.lambda_:12.4f} "
              f"value={res.value:14.4f}")
    with open(outpath, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    lams = np.array([float(r["lambda"]) for r in rows])
    trend = "nonincreasing" if np.all(np.diff(lams) <= 1e-9) else "MIXED"
    print(f"sweep: multiplier {lams[0]:.1f} -> {lams[-1]:.1f} ({trend}) "
          f"-> {outpath}")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    ap.add_argument("--seeds", type=int, nargs="+", default=[1000, 1002])
    ap.add_argument("--dims", type=int, nargs="+",
                    default=list(range(2, 11)))
    ap.add_argument("--delta", type=float, default=2.0)
    ap.add_argument("--sweep-n", type=int, default=15)
    ap.add_argument("--sweep-seed", type=int, default=42)
    ap.add_argument("--sweep-deltas", type=float, nargs="+",
                    default=[float(d) for d in range(1, 11)])
    ap.add_argument("--outdir", type=Path, default=Path("results"))
    args = ap.parse_args()

    args.outdir.mkdir(parents=True, exist_ok=True)
    run_battery(args.seeds, args.dims, args.delta,
                args.outdir / "boundary_battery.csv")
    print()
    run_sweep(args.sweep_n, args.sweep_seed, args.sweep_deltas,
              args.outdir / "boundary_sweep.csv")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
