#!/usr/bin/env python3
"""Sweep the sampling resolution and report sample counts plus QP/erosion
timing means from short dynamic episodes (the computational-cost trade-off
table for this pipeline).

Usage: python scripts/run_epsilon_sweep.py [--dims 64] [--duration 6] [--out sweep.json]
"""

import argparse
import json

import numpy as np

from poisson_safety import (default_models, generate_dense_cloud,
                            poisson_disk_downsample, run_episode)
from poisson_safety.scenarios import moving_sphere_scenario
from poisson_safety.simulator import NominalSpec
from poisson_safety.telemetry import summarize_records


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dims", type=int, default=64)
    ap.add_argument("--duration", type=float, default=6.0)
    ap.add_argument("--seed", type=int, default=104)
    ap.add_argument("--epsilons", type=float, nargs="+",
                    default=[0.05, 0.1, 0.2],
                    help="0.01 works too but its dense oracle cloud makes "
                         "episodes slow")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    model = default_models()["arm7"]
    rows = []
    print(f"{'eps':>6} {'N':>6} {'qp (ms)':>9} {'buffer (ms)':>12} {'pde (ms)':>10}")
    for eps in args.epsilons:
        cloud = generate_dense_cloud(model, delta=eps / 10)
        samples = poisson_disk_downsample(cloud, eps)
        sc = moving_sphere_scenario(seed=args.seed, dims=args.dims,
                                    duration=args.duration, epsilon=eps,
                                    delta=eps / 10)
        # adversarial nominal keeps the barrier rows engaged, so the QP
        # timing reflects the row count rather than the feasibility fast path
        sc.nominal = NominalSpec(mode="adversarial_toward_obstacle", kp=1.5,
                                 obstacle_index=0)
        records = run_episode(sc, cloud=cloud, samples=samples)
        summary = summarize_records(records, meta={"delta": sc.delta})
        buffer_when_run = [r.buffer_time for r in records if r.buffer_time > 0]
        pde_when_run = [r.pde_time for r in records if r.pde_iters > 0]
        row = {
            "epsilon": eps,
            "n_samples": samples.count,
            "mean_qp_time": summary["mean_qp_time"],
            "mean_buffer_time_when_run": float(np.mean(buffer_when_run)),
            "mean_pde_time_when_run": float(np.mean(pde_when_run)) if pde_when_run else 0.0,
            "infeasible_ticks": summary["infeasible_ticks"],
            "violations": summary["violations_true_clearance"],
        }
        rows.append(row)
        print(f"{eps:>6} {row['n_samples']:>6} "
              f"{1e3 * row['mean_qp_time']:>9.3f} "
              f"{1e3 * row['mean_buffer_time_when_run']:>12.3f} "
              f"{1e3 * row['mean_pde_time_when_run']:>10.1f}")
    if args.out:
        with open(args.out, "w") as f:
            json.dump(rows, f, indent=2)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
