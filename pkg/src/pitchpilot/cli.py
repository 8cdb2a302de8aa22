"""Command-line front end: ``pitchpilot run|list|validate|show``."""

from __future__ import annotations

import argparse
import csv
import logging
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from . import metrics
from .scenario import BUILTIN_ALIASES, Scenario, builtin_names, dump_scenario, load_scenario
from .simloop import TRACE_COLUMNS, ConfigError, ScheduleReference, SimulationTrace, StepReference, run

log = logging.getLogger("pitchpilot")

EXIT_OK = 0
EXIT_DIVERGED = 1
EXIT_CONFIG = 2


@dataclass
class RunResult:
    label: str
    trace: SimulationTrace
    step: Optional[metrics.StepMetrics] = None
    segments: list = field(default_factory=list)
    disturbance: Optional[metrics.DisturbanceMetrics] = None


def analyze_run(label: str, config, trace: SimulationTrace) -> RunResult:
    res = RunResult(label, trace)
    if trace.diverged or len(trace) == 0:
        return res
    dist = config.disturbance
    end = dist.start_time if dist is not None else float("inf")
    ref = config.reference
    if isinstance(ref, StepReference):
        w = trace.window(ref.start, end)
        if ref.amplitude == 0:
            final = float(w.theta[-max(1, len(w) // 20):].mean()) if len(w) else 0.0
            res.step = metrics.StepMetrics(None, 0.0, 0.0, None, 0, final, degenerate=True)
        elif len(w):
            res.step = metrics.analyze_step(w, ref.start, ref.amplitude)
    elif isinstance(ref, ScheduleReference):
        res.segments = metrics.analyze_segments(trace, ref.segments(min(end, trace.t[-1] + config.dt)))
    if dist is not None:
        res.disturbance = metrics.disturbance_deviation(trace, dist.start_time)
    return res


def run_all(scenario: Scenario) -> dict[str, RunResult]:
    return {r.label: analyze_run(r.label, r.config, run(r.config)) for r in scenario.runs}


def _csv_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label) + ".csv"


def write_trace_csv(trace: SimulationTrace, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in trace.as_array():
            w.writerow([repr(float(v)) for v in row])


def _clean(v):
    if isinstance(v, float):
        return float(v)
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def build_summary(scenario: Scenario, results: dict[str, RunResult]) -> dict:
    runs = {}
    for label, res in results.items():
        block: dict = {"status": "diverged" if res.trace.diverged else "ok", "csv": _csv_name(label)}
        if res.trace.diverged:
            block["failure_time"] = res.trace.failure_time
        if res.step is not None:
            block["step"] = res.step.to_dict()
        if res.segments:
            block["segments"] = [m.to_dict() for m in res.segments]
        if res.disturbance is not None:
            block["disturbance"] = {
                "peak_deviation": res.disturbance.peak_deviation,
                "rms_deviation": res.disturbance.rms_deviation,
            }
        runs[label] = block

    comparisons = []
    for a, b in scenario.comparisons():
        ra, rb = results[a], results[b]
        entry: dict = {"a": a, "b": b}
        if ra.step is not None and rb.step is not None:
            rep = metrics.compare(ra.step, rb.step, a, b)
            entry["step"] = rep.to_dict()
            entry["speed_improvement_pct"] = rep.speed_improvement_pct
            entry["overshoot_reduction_pts"] = rep.overshoot_reduction_pts
        if ra.segments and rb.segments:
            entry["segments"] = [metrics.compare(x, y, a, b).to_dict() for x, y in zip(ra.segments, rb.segments)]
        if ra.disturbance is not None and rb.disturbance is not None:
            entry["disturbance"] = {
                "peak_deviation": {a: ra.disturbance.peak_deviation, b: rb.disturbance.peak_deviation},
                "rms_deviation": {a: ra.disturbance.rms_deviation, b: rb.disturbance.rms_deviation},
            }
        comparisons.append(entry)
    return _clean(
        {
            "scenario": scenario.name,
            "bands": {
                "settling": metrics.SETTLING_BAND,
                "peak": metrics.PEAK_BAND,
                "final_window": metrics.FINAL_WINDOW,
            },
            "runs": runs,
            "comparisons": comparisons,
        }
    )


def run_scenario(scenario: Scenario, out_dir) -> tuple[int, dict]:
    """Run every labelled config, write CSVs and ``summary.yaml``; return (exit code, summary)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = run_all(scenario)
    for label, res in results.items():
        write_trace_csv(res.trace, out / _csv_name(label))
        if res.trace.diverged:
            log.warning("%s: diverged at t=%s s", label, res.trace.failure_time)
    summary = build_summary(scenario, results)
    (out / "summary.yaml").write_text(yaml.safe_dump(summary, sort_keys=False), encoding="utf-8")
    code = EXIT_DIVERGED if any(r.trace.diverged for r in results.values()) else EXIT_OK
    return code, summary


def _print_summary(summary: dict) -> None:
    for label, block in summary["runs"].items():
        line = f"{label:>16s}: {block['status']}"
        step = block.get("step")
        if step:
            rise = step["rise_time"]
            line += (
                f"  rise={'n/a' if rise is None else f'{rise:.3f}s'}"
                f"  overshoot={step['overshoot_pct']:.2f}%"
                f"  sse={step['steady_state_error_pct']:.2f}%"
                f"  peaks={step['peak_count']}"
            )
        dist = block.get("disturbance")
        if dist:
            line += f"  dev_peak={dist['peak_deviation']:.4f}  dev_rms={dist['rms_deviation']:.4f}"
        for i, seg in enumerate(block.get("segments", [])):
            rise = seg["rise_time"]
            line += f"\n{'':>18s}segment {i}: rise={'n/a' if rise is None else f'{rise:.3f}s'} overshoot={seg['overshoot_pct']:.2f}%"
        print(line)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pitchpilot", description="Pitch-attitude autopilot simulations")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a built-in scenario or a scenario file")
    r.add_argument("scenario", help="built-in name (see `list`) or path to a YAML file")
    r.add_argument("--out-dir", default="out", help="directory for CSVs and summary (default: out/<scenario>)")
    r.add_argument("--dt", type=float, help="override the control period (s)")
    r.add_argument("--duration", type=float, help="override the simulated duration (s)")

    sub.add_parser("list", help="list built-in scenarios")

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("path")

    s = sub.add_parser("show", help="print a scenario fully expanded")
    s.add_argument("scenario")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "list":
            aliases = {v: k for k, v in BUILTIN_ALIASES.items()}
            for name in builtin_names():
                sc = load_scenario(name)
                print(f"{aliases.get(name, ''):6s} {name:26s} {sc.description}")
            return EXIT_OK
        if args.command == "validate":
            sc = load_scenario(args.path)
            print(f"{sc.name}: ok ({len(sc.runs)} runs: {', '.join(sc.labels)})")
            return EXIT_OK
        if args.command == "show":
            print(dump_scenario(load_scenario(args.scenario)), end="")
            return EXIT_OK
        sc = load_scenario(args.scenario).with_overrides(args.dt, args.duration)
        out_dir = Path(args.out_dir) / sc.name
        code, summary = run_scenario(sc, out_dir)
        _print_summary(summary)
        print(f"wrote {out_dir}")
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
