"""Command line front end for scenario validation, runs and comparisons.

Exit codes: 0 success, 1 usage error (bad arguments, unreadable or
ill-formed files, bad overrides), 2 scenario validation failure, 3 runtime
abort.  ``run`` prints one JSON summary line on stdout; diagnostics go to
stderr.  Scalar config values can be overridden with dotted-path
``key=value`` arguments, e.g. ``mode=traditional merging.gamma=0.8``.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import subtasks
from .sim import (LogSeries, ScenarioError, SimulationAbort, load_scenario,
                  parse_scenario, run, validate)

USAGE_ERROR = 1
VALIDATION_ERROR = 2
RUNTIME_ABORT = 3


@dataclass
class RunSummary:
    """Headline metrics of one run, all derived from the log alone."""

    scenario: str
    mode: str
    steps: int
    max_primary_err: float | None
    min_clearance: float | None
    min_margin: float | None
    saturation_events: int
    wall_seconds: float

    def line(self) -> str:
        return json.dumps(asdict(self))


def summarize(series: LogSeries, wall_seconds: float) -> RunSummary:
    """Compute the summary metrics from a log.

    max_primary_err is the largest Euclidean position deviation of the first
    primary target (from the aux_ref0/aux_act0 columns); min_clearance and
    min_margin scan the aux clearance/margin columns; saturation events count
    upward crossings of allocation entries onto gamma, with gamma recovered
    from the conserved row sums.
    """
    path_err = None
    if "aux_ref0_x" in series.columns and "aux_ref0_y" in series.columns:
        dx = series.col("aux_ref0_x") - series.col("aux_act0_x")
        dy = series.col("aux_ref0_y") - series.col("aux_act0_y")
        path_err = float(np.max(np.hypot(dx, dy)))
    clear = series.cols("aux_clearance_")
    margin = series.cols("aux_margin_")
    A = series.cols("A_")
    r_cols = A.shape[1]
    # gamma = conserved row sum; every row sums to it, use the first record
    l = sum(1 for c in series.columns if c.startswith("fbar_"))
    gamma = float(np.sum(A[0, :l])) if l else 0.0
    sat = (A >= gamma - 1e-9) if r_cols else np.zeros((len(series.rows), 0), bool)
    events = int(np.sum(~sat[:-1] & sat[1:])) if len(series.rows) > 1 else 0
    return RunSummary(
        scenario=series.meta.get("name", ""),
        mode=series.meta.get("mode", ""),
        steps=len(series.rows) - 1,
        max_primary_err=path_err,
        min_clearance=float(np.min(clear)) if clear.size else None,
        min_margin=float(np.min(margin)) if margin.size else None,
        saturation_events=events,
        wall_seconds=round(wall_seconds, 3))


def _apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply dotted-path key=value overrides onto existing scalar leaves."""
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        path, raw = item.split("=", 1)
        keys = path.split(".")
        node = doc
        for k in keys[:-1]:
            if not isinstance(node, dict) or k not in node:
                raise ValueError(f"override path {path!r} does not exist in the scenario")
            node = node[k]
        leaf = keys[-1]
        if not isinstance(node, dict) or leaf not in node:
            raise ValueError(f"override path {path!r} does not exist in the scenario")
        if isinstance(node[leaf], (dict, list)):
            raise ValueError(f"override path {path!r} is not a scalar value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node[leaf] = value
    return doc


def _load_doc(path: str):
    with open(path) as fh:
        return json.load(fh)


def cmd_validate(args) -> int:
    try:
        doc = _load_doc(args.scenario)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return USAGE_ERROR
    try:
        config = parse_scenario(doc, name=_stem(args.scenario))
    except ScenarioError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return VALIDATION_ERROR
    diagnostics = validate(config)
    for d in diagnostics:
        print(str(d), file=sys.stderr)
    if any(d.severity == "error" for d in diagnostics):
        return VALIDATION_ERROR
    print(f"{args.scenario}: ok")
    return 0


def _prepare(path: str, overrides: list[str]):
    doc = _load_doc(path)
    doc = _apply_overrides(doc, overrides)
    return parse_scenario(doc, name=_stem(path))


def _stem(path: str) -> str:
    import pathlib
    return pathlib.Path(path).stem


def cmd_run(args) -> int:
    try:
        config = _prepare(args.scenario, args.overrides)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"cannot load scenario: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except ScenarioError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return VALIDATION_ERROR
    for d in validate(config):
        print(str(d), file=sys.stderr)
    start = time.perf_counter()
    try:
        series = run(config, csv_path=args.output)
    except ScenarioError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return VALIDATION_ERROR
    except SimulationAbort as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return RUNTIME_ABORT
    print(summarize(series, time.perf_counter() - start).line())
    return 0


def cmd_compare(args) -> int:
    try:
        doc = _load_doc(args.scenario)
        doc = _apply_overrides(doc, args.overrides)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"cannot load scenario: {exc}", file=sys.stderr)
        return USAGE_ERROR
    base = doc.get("output", _stem(args.scenario) + ".csv")
    if base.endswith(".csv"):
        base = base[:-4]
    summaries = {}
    for mode in ("merged", "traditional"):
        mode_doc = json.loads(json.dumps(doc))
        mode_doc["mode"] = mode
        try:
            config = parse_scenario(mode_doc, name=_stem(args.scenario))
        except ScenarioError as exc:
            for d in exc.diagnostics:
                print(f"error: {d}", file=sys.stderr)
            return VALIDATION_ERROR
        out = f"{base}_{mode}.csv"
        start = time.perf_counter()
        try:
            series = run(config, csv_path=out)
        except ScenarioError as exc:
            for d in exc.diagnostics:
                print(f"error: {d}", file=sys.stderr)
            return VALIDATION_ERROR
        except SimulationAbort as exc:
            print(f"aborted ({mode}): {exc}", file=sys.stderr)
            return RUNTIME_ABORT
        summaries[mode] = summarize(series, time.perf_counter() - start)
        print(summaries[mode].line())
    merged, trad = summaries["merged"], summaries["traditional"]
    print(f"{'metric':<20}{'merged':>16}{'traditional':>16}{'delta':>16}")
    for name in ("max_primary_err", "min_clearance", "min_margin", "saturation_events"):
        a, b = getattr(merged, name), getattr(trad, name)
        if a is None or b is None:
            print(f"{name:<20}{_fmt(a):>16}{_fmt(b):>16}{'-':>16}")
        else:
            print(f"{name:<20}{_fmt(a):>16}{_fmt(b):>16}{_fmt(a - b):>16}")
    return 0


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, int):
        return str(v)
    return f"{v:.6g}"


def cmd_list_subtasks(_args) -> int:
    descriptions = {
        "joint-setpoint":
            "drive joint 'joint' to 'target' [rad]; velocity gain*(target - q)",
        "joint-limit":
            "repel joint 'joint' from travel limits 'min'/'max' once the "
            "distance drops below 'margin' [rad]",
        "obstacle-clearance":
            "push chain point 'point' away from obstacle 'obstacle' along "
            "'axis' once the distance drops below 'threshold' [m]",
        "singularity-avoidance":
            "climb manipulability of 'point' (axes 'axes') along joint "
            "coordinate 'joint'",
    }
    for kind in subtasks.KINDS:
        print(f"{kind:<24}{descriptions[kind]}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="redmux",
        description="Batch kinematic simulation with dynamic subtask multiplexing.")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for randomized test tooling; shipped scenarios are deterministic")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="roll out one scenario and write its log")
    p.add_argument("scenario")
    p.add_argument("overrides", nargs="*", help="dotted-path key=value overrides")
    p.add_argument("-o", "--output", default=None, help="override the CSV output path")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run both modes and print metric deltas")
    p.add_argument("scenario")
    p.add_argument("overrides", nargs="*", help="dotted-path key=value overrides")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("list-subtasks", help="list built-in subtask kinds")
    p.set_defaults(func=cmd_list_subtasks)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    if args.seed is not None:
        np.random.seed(args.seed)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
