"""Telemetry records as JSON-lines plus episode summaries.

One JSONL record per control tick; the summary aggregates each scalar column
(min/mean/max/p99), counts safety-relevant events, and carries the episode
metadata the timing-trend analyses need (sample count, epsilon).
"""

from __future__ import annotations

import json
import math
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .simulator import TelemetryRecord

SCALAR_COLUMNS = ("min_h_samples", "min_true_clearance", "qp_time", "pde_time",
                  "buffer_time", "slack")


def record_to_dict(rec: TelemetryRecord) -> dict:
    return {
        "t": rec.t,
        "q": [float(x) for x in rec.q],
        "v_nom": [float(x) for x in rec.v_nom],
        "v_safe": [float(x) for x in rec.v_safe],
        "min_h_samples": rec.min_h_samples,
        "min_true_clearance": rec.min_true_clearance,
        "qp_time": rec.qp_time,
        "pde_time": rec.pde_time,
        "buffer_time": rec.buffer_time,
        "pde_iters": rec.pde_iters,
        "qp_status": rec.qp_status,
        "slack": rec.slack,
        "premise_ok": rec.premise_ok,
        "clamp_anomaly": rec.clamp_anomaly,
        "base_proximal": rec.base_proximal,
    }


def write_jsonl(records: Iterable[TelemetryRecord], path) -> None:
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(record_to_dict(rec)) + "\n")


def read_jsonl(path) -> Tuple[List[dict], int]:
    """Parse a telemetry file; corrupt lines are skipped and counted."""
    rows: List[dict] = []
    skipped = 0
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                if not isinstance(row, dict) or "t" not in row:
                    raise ValueError("not a record")
                rows.append(row)
            except (json.JSONDecodeError, ValueError):
                skipped += 1
    return rows, skipped


def _column_stats(values: List[float]) -> dict:
    if not values:
        return {"min": None, "mean": None, "max": None, "p99": None}
    arr = np.asarray(values, dtype=float)
    return {
        "min": float(arr.min()),
        "mean": float(arr.mean()),
        "max": float(arr.max()),
        "p99": float(np.percentile(arr, 99)),
    }


def summarize_rows(rows: List[dict], meta: Optional[dict] = None,
                   skipped: int = 0) -> dict:
    """Aggregate parsed telemetry rows into the summary document."""
    summary: Dict = {"ticks": len(rows), "corrupt_lines_skipped": skipped}
    if meta:
        summary.update(meta)
    cols: Dict[str, List[float]] = {c: [] for c in SCALAR_COLUMNS}
    dev = []
    violations_true = violations_h = infeasible = degraded = 0
    clamp = premise_bad = base_prox = theorem_breaches = 0
    delta = float(meta.get("delta", 0.0)) if meta else 0.0
    for row in rows:
        for c in SCALAR_COLUMNS:
            if c in row and row[c] is not None:
                cols[c].append(float(row[c]))
        if "v_nom" in row and "v_safe" in row:
            dv = np.asarray(row["v_safe"], float) - np.asarray(row["v_nom"], float)
            dev.append(float(np.linalg.norm(dv)))
        clear = float(row.get("min_true_clearance", math.inf))
        min_h = float(row.get("min_h_samples", math.inf))
        status = row.get("qp_status", "optimal")
        if clear < 0.0:
            violations_true += 1
        if min_h < 0.0:
            violations_h += 1
        if status == "infeasible":
            infeasible += 1
        if status == "degraded":
            degraded += 1
        if row.get("clamp_anomaly"):
            clamp += 1
        if row.get("premise_ok") is False:
            premise_bad += 1
        if row.get("base_proximal"):
            base_prox += 1
        if status == "optimal" and min_h >= 0.0 and clear < -delta:
            theorem_breaches += 1
    for c in SCALAR_COLUMNS:
        summary[c] = _column_stats(cols[c])
    summary["mean_velocity_deviation"] = float(np.mean(dev)) if dev else None
    summary["violations_true_clearance"] = violations_true
    summary["violations_min_h"] = violations_h
    summary["theorem_breaches"] = theorem_breaches
    summary["infeasible_ticks"] = infeasible
    summary["degraded_ticks"] = degraded
    summary["clamp_anomalies"] = clamp
    summary["premise_violations"] = premise_bad
    summary["base_proximal_ticks"] = base_prox
    summary["mean_qp_time"] = summary["qp_time"]["mean"]
    summary["mean_pde_time"] = summary["pde_time"]["mean"]
    summary["mean_buffer_time"] = summary["buffer_time"]["mean"]
    return summary


def summarize_records(records: List[TelemetryRecord],
                      meta: Optional[dict] = None) -> dict:
    return summarize_rows([record_to_dict(r) for r in records], meta=meta)


def summarize_file(path, meta: Optional[dict] = None) -> dict:
    rows, skipped = read_jsonl(path)
    return summarize_rows(rows, meta=meta, skipped=skipped)
