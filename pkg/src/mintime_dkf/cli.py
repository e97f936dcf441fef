"""Command-line entry point: run a scenario and write its result bundle.

The bundle is ``summary.json`` plus the per-step traces, either as CSV files
(``--format csv``, the default) or as one ``traces.json``. Every table has a
header row and a ``time`` column in simulated seconds (step times the sample
time). Floats are written with 17 significant digits and nothing in the output
depends on the wall clock, so identical invocations give identical bytes.

Exit codes: 0 success, 1 invalid input (bad flags, unreadable or invalid
scenario), 2 numerical failure during the run.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import config_to_dict, parse_config, resolved_settings
from .errors import DKFError, ValidationError
from .harness import ALGORITHMS, RunResult, run_scenario, error_comparison_check, time_to_consensus_stats, validate

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2

A0_TOLERANCE_DEFINITION = (
    "A0 node time = sample_time * first step after which max|S_i - S^c| <= "
    "a0_tolerance * max|S^c| for every later step of the run"
)


def fmt(x) -> str:
    """17-significant-digit text for a float; integers and strings unchanged."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return "%.17g" % x
    return str(x)


def dump_json(obj, indent: int = 0) -> str:
    """Deterministic JSON with sorted keys and 17-digit floats (NaN becomes null)."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dump_json(obj[k], indent + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(dump_json(v) for v in seq) + "]"
        return "[\n" + ",\n".join(inner + dump_json(v, indent + 1) for v in seq) + "\n" + pad + "]"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)) and not math.isfinite(float(obj)):
        return "null"
    return fmt(obj)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mintime-dkf", description=__doc__.splitlines()[0])
    p.add_argument("--scenario", required=True, help="scenario file or bundled scenario name")
    p.add_argument("--algorithms", help=f"comma-separated subset of {','.join(ALGORITHMS)}")
    p.add_argument("--seed", type=int, help="run seed for the noise streams")
    p.add_argument("--steps", type=int, help="number of simulation steps")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--sigma-threshold", type=float, help="relative rank-loss threshold of the detectors")
    p.add_argument("--rho", type=float, help="acceptance threshold of the robust detectors")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="trace format")
    return p


def _apply_overrides(cfg, args):
    changes = {}
    if args.algorithms is not None:
        changes["algorithms"] = tuple(a.strip().lower() for a in args.algorithms.split(",") if a.strip())
    if args.seed is not None:
        changes["run_seed"] = args.seed
    if args.steps is not None:
        changes["steps"] = args.steps
    if args.sigma_threshold is not None:
        changes["sigma_threshold"] = args.sigma_threshold
    if args.rho is not None:
        changes["rho"] = args.rho
    cfg = dataclasses.replace(cfg, **changes)
    validate(cfg)
    return cfg


def trace_tables(res: RunResult) -> dict[str, tuple[list[str], list[list]]]:
    """Name -> (header, rows) for every per-step trace of a run."""
    steps, m = res.truth.shape
    n = res.config.n
    dt = res.sample_time
    times = [k * dt for k in range(steps)]
    xs = [f"x{j}" for j in range(m)]
    tables = {}
    tables["truth"] = (["step", "time", *xs], [[k, times[k], *res.truth[k]] for k in range(steps)])
    tables["ckf"] = (["step", "time", *xs], [[k, times[k], *res.ckf[k]] for k in range(steps)])
    for name, est in res.estimates.items():
        rows = [[k, times[k], i, *est[k, i]] for k in range(steps) for i in range(n)]
        tables[f"estimates_{name}"] = (["step", "time", "node", *xs], rows)
    elems = [f"s_{h}_{l}" for h in range(m) for l in range(m)]
    # row k holds the band-pass output the filters use at step k
    s_rows = [[k, times[k], i, *res.s_trace[k + 1, i].ravel()] for k in range(steps) for i in range(n)]
    tables["s_elements"] = (["step", "time", "node", *elems], s_rows)
    err_cols = [f"{name}_node{i}" for name in res.errors for i in range(n)]
    err_rows = [[k, times[k], *[res.errors[name][k, i] for name in res.errors for i in range(n)]] for k in range(steps)]
    tables["errors"] = (["step", "time", *err_cols], err_rows)
    det_rows = [
        [name, d["node"], d["element"][0], d["element"][1], d["step"], d["step"] * dt, d["phi"]]
        for name, dets in sorted(res.detections.items())
        for d in dets
    ]
    tables["detections"] = (["algorithm", "node", "h", "l", "step", "time", "phi"], det_rows)
    return tables


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def summarize(res: RunResult) -> dict:
    cfg = res.config
    n = cfg.n
    stats = time_to_consensus_stats(res)
    detection = {
        name: {
            "node_step": steps,
            "node_time": [None if s is None else s * res.sample_time for s in steps],
            "assembled": res.assembled[name].tolist(),
        }
        for name, steps in res.detect_step.items()
    }
    flags = {}
    scale = np.abs(res.s_exact).max()
    for name in res.detect_step:
        done = [s for s in res.detect_step[name] if s is not None]
        flags[f"{name}_all_detected"] = len(done) == n
        if name == "a1":
            flags["a1_within_step_bound"] = len(done) == n and max(done) + 1 <= 4 * n + 2
        if done:
            err = np.nanmax(np.abs(res.assembled[name] - res.s_exact)) / scale
            flags[f"{name}_assembled_rel_error"] = float(err)
            flags[f"{name}_assembled_matches"] = bool(err <= 1e-6)
    if "a0" in stats and "a1" in stats and stats["a0"]["average"] and stats["a1"]["average"] is not None:
        ratio = stats["a1"]["average"] / stats["a0"]["average"]
        flags["a1_over_a0_average"] = ratio
        flags["a1_over_a0_at_most_0.3"] = ratio <= 0.3
    if res.cmp_a0 is not None:
        flags["error_comparison_check"] = error_comparison_check(res)
    return {
        "scenario": cfg.name,
        "steps": cfg.steps,
        "stats": stats,
        "detection": detection,
        "exact_average": res.s_exact.tolist(),
        "acceptance": flags,
        "a0_tolerance_definition": A0_TOLERANCE_DEFINITION,
        "resolved": resolved_settings(cfg),
        "config": config_to_dict(cfg),
    }


def render_bundle(res: RunResult, fmt_name: str) -> dict[str, str]:
    files = {"summary.json": dump_json(summarize(res)) + "\n"}
    tables = trace_tables(res)
    if fmt_name == "csv":
        for name, (header, rows) in tables.items():
            files[f"{name}.csv"] = render_csv(header, rows)
    else:
        doc = {name: {"columns": header, "rows": rows} for name, (header, rows) in tables.items()}
        files["traces.json"] = dump_json(doc) + "\n"
    return files


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _apply_overrides(parse_config(args.scenario), args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        res = run_scenario(cfg)
        files = render_bundle(res, args.format)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except DKFError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)
    print(f"wrote {len(files)} files to {out}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
