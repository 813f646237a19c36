#!/usr/bin/env python3
"""Offline telemetry plots: minimum safety value across samples, true
clearance, commanded vs filtered joint speeds, and solver timings from a
telemetry JSONL file.

Usage: python scripts/plot_telemetry.py runs/telemetry.jsonl [-o plots.png]
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from poisson_safety.telemetry import read_jsonl


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("telemetry")
    ap.add_argument("-o", "--out", default="telemetry.png")
    args = ap.parse_args()

    rows, skipped = read_jsonl(args.telemetry)
    if skipped:
        print(f"warning: skipped {skipped} corrupt lines")
    t = np.array([r["t"] for r in rows])
    min_h = np.array([r["min_h_samples"] for r in rows])
    clearance = np.array([r["min_true_clearance"] for r in rows])
    v_nom = np.array([np.linalg.norm(r["v_nom"]) for r in rows])
    v_safe = np.array([np.linalg.norm(r["v_safe"]) for r in rows])
    qp_ms = 1e3 * np.array([r["qp_time"] for r in rows])
    pde_ms = 1e3 * np.array([r["pde_time"] for r in rows])

    fig, axes = plt.subplots(4, 1, figsize=(9, 11), sharex=True)
    axes[0].plot(t, min_h, lw=1.2, color="tab:blue")
    axes[0].axhline(0.0, color="k", lw=0.8, ls="--")
    axes[0].set_ylabel("min h over samples")
    axes[1].plot(t, clearance, lw=1.2, color="tab:green")
    axes[1].axhline(0.0, color="k", lw=0.8, ls="--")
    axes[1].set_ylabel("true clearance (m)")
    axes[2].plot(t, v_nom, lw=1.0, label="|v_nom|", color="tab:gray")
    axes[2].plot(t, v_safe, lw=1.0, label="|v_safe|", color="tab:red")
    axes[2].set_ylabel("joint speed (rad/s)")
    axes[2].legend(loc="upper right", fontsize=8)
    axes[3].plot(t, qp_ms, lw=0.8, label="qp (ms)")
    axes[3].plot(t, pde_ms, lw=0.8, label="pde (ms)")
    axes[3].set_ylabel("solver time (ms)")
    axes[3].set_xlabel("t (s)")
    axes[3].legend(loc="upper right", fontsize=8)
    infeasible = [r["t"] for r in rows if r.get("qp_status") == "infeasible"]
    for ax in axes[:2]:
        for ti in infeasible:
            ax.axvline(ti, color="orange", alpha=0.25, lw=0.6)
    fig.tight_layout()
    fig.savefig(args.out, dpi=130)
    print(f"wrote {args.out} ({len(rows)} records)")


if __name__ == "__main__":
    main()
