"""Command-line entry points.

``psfsim run`` executes a scenario headless (single-threaded, deterministic)
and writes telemetry JSONL plus a summary JSON. ``psfsim serve`` starts the
live session server for the browser UI. ``psfsim summarize`` re-aggregates an
existing telemetry file.

Exit codes: 0 clean run, 1 completed with safety violations, 2 scenario
parse/validation failure, 3 runtime abort.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .poisson_field import dump_field
from .scenario_io import ScenarioError, load_scenario
from .simulator import EpisodeAbort, Simulation
from .telemetry import summarize_records, write_jsonl


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="psfsim",
                                description="Full-body safety-filter simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario headless")
    run.add_argument("scenario", type=Path)
    run.add_argument("--out", type=Path, default=Path("psfsim_out"))
    run.add_argument("--seed", type=int, default=None, help="override scenario seed")
    run.add_argument("--ticks", type=int, default=None, help="override tick count")
    run.add_argument("--unfiltered", action="store_true",
                     help="bypass the QP (paired baseline runs)")
    run.add_argument("--dump-fields", type=int, metavar="K", default=0,
                     help="dump the safety field every K ticks")
    run.add_argument("--deterministic", action="store_true",
                     help="accepted for compatibility; headless runs are "
                          "always single-threaded and deterministic")

    serve = sub.add_parser("serve", help="serve a live teleop session")
    serve.add_argument("scenario", type=Path)
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--ui-dir", type=Path, default=None,
                       help="directory with the built browser UI")

    summ = sub.add_parser("summarize", help="aggregate a telemetry JSONL file")
    summ.add_argument("telemetry", type=Path)
    summ.add_argument("--out", type=Path, default=None)
    return p


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as e:
        print(f"error: {args.scenario}: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if args.seed is not None:
        scenario.seed = args.seed
    args.out.mkdir(parents=True, exist_ok=True)
    records = []
    try:
        sim = Simulation(scenario, unfiltered=args.unfiltered)
        total = scenario.num_ticks if args.ticks is None else args.ticks
        for k in range(total):
            rec = sim.step()
            records.append(rec)
            if args.dump_fields and k % args.dump_fields == 0 and sim.field is not None:
                dump_field(sim.field, args.out / f"field_{k:06d}.bin")
    except EpisodeAbort as e:
        print(f"abort: {e}", file=sys.stderr)
        if records:
            write_jsonl(records, args.out / "telemetry.jsonl")
        return 3
    write_jsonl(records, args.out / "telemetry.jsonl")
    meta = {"scenario": scenario.name, "epsilon": scenario.epsilon,
            "delta": scenario.delta, "n_samples": sim.samples.count,
            "unfiltered": args.unfiltered, "seed": scenario.seed}
    summary = summarize_records(records, meta=meta)
    with open(args.out / "summary.json", "w") as f:
        json.dump(summary, f, indent=2)
        f.write("\n")
    violations = summary["violations_true_clearance"] + summary["violations_min_h"]
    print(f"{scenario.name}: {summary['ticks']} ticks, "
          f"violations={violations}, infeasible={summary['infeasible_ticks']}, "
          f"mean qp {1e3 * (summary['mean_qp_time'] or 0):.2f} ms")
    return 0 if violations == 0 else 1


def cmd_serve(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as e:
        print(f"error: {args.scenario}: {e}", file=sys.stderr)
        return 2
    import uvicorn

    from .server import build_app

    app = build_app(scenario, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_summarize(args) -> int:
    from .telemetry import summarize_file

    try:
        summary = summarize_file(args.telemetry)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    text = json.dumps(summary, indent=2)
    if args.out is not None:
        args.out.write_text(text + "\n")
    else:
        print(text)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "serve":
        return cmd_serve(args)
    return cmd_summarize(args)


if __name__ == "__main__":
    sys.exit(main())
