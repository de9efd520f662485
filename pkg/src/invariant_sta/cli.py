"""Command-line entry point: design, min-time, algebra-check, batch."""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import StaError
from .scenario import (
    EXIT_USAGE,
    exit_code,
    parse_scenario,
    run_algebra_check,
    run_design,
    run_min_time,
    write_report,
)


def _bracket(text):
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("bracket must be LO,HI") from None
    if not 0 < lo < hi:
        raise argparse.ArgumentTypeError("bracket must satisfy 0 < LO < HI")
    return lo, hi


def _summary(report):
    parts = [f"{report.name}: feasible={report.feasible}"]
    if report.first_violation_time is not None:
        parts.append(f"first_violation_time={report.first_violation_time:g}")
    if report.verified is not None:
        parts.append(f"verified={report.verified}")
    if report.fidelities:
        fids = [f for f in report.fidelities if f is not None]
        if fids:
            parts.append(f"min_fidelity={min(fids):.10f}")
    if report.min_time is not None:
        parts.append(f"min_time={report.min_time:g}")
    return " ".join(parts)


def cmd_design(args):
    spec = parse_scenario(args.scenario)
    out = Path(args.output) if args.output else Path(spec.name)
    report = run_design(spec, out)
    print(_summary(report))
    for line in report.failures + report.notes:
        print(f"  {line}")
    return exit_code(report)


def cmd_min_time(args):
    spec = parse_scenario(args.scenario)
    report = run_min_time(spec, args.bracket)
    print(_summary(report))
    for line in report.failures + report.notes:
        print(f"  {line}")
    if args.output:
        Path(args.output).mkdir(parents=True, exist_ok=True)
        write_report(report, Path(args.output) / "report.json")
    return exit_code(report)


def cmd_algebra_check(args):
    print(run_algebra_check(args.algebra))
    return 0


def _batch_entries(path):
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("scenarios")
    if not isinstance(data, list) or not all(isinstance(x, str) for x in data):
        raise StaError("batch file must be a list of scenario paths or {\"scenarios\": [...]}")
    base = Path(path).parent
    return [str(p if Path(p).is_absolute() else base / p) for p in data]


def _run_one(scenario_path, out_root):
    try:
        spec = parse_scenario(scenario_path)
        report = run_design(spec, Path(out_root) / spec.name)
    except (StaError, OSError) as exc:
        return scenario_path, EXIT_USAGE, f"{scenario_path}: {exc}"
    return scenario_path, exit_code(report), _summary(report)


def cmd_batch(args):
    paths = _batch_entries(args.batch)
    out_root = Path(args.output or "batch_output")
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, paths, [out_root] * len(paths)))
    else:
        results = [_run_one(p, out_root) for p in paths]
    for _, _, line in results:
        print(line)
    # worst outcome wins
    return max((code for _, code, _ in results), default=0)


def build_parser():
    p = argparse.ArgumentParser(
        prog="invariant-sta",
        description="Invariant-based inverse engineering of shortcuts to adiabaticity.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="design and verify one scenario")
    d.add_argument("scenario")
    d.add_argument("-o", "--output", help="output directory (default: scenario name)")
    d.set_defaults(func=cmd_design)

    m = sub.add_parser("min-time", help="bisect the minimum feasible final time")
    m.add_argument("scenario")
    m.add_argument("--bracket", type=_bracket, required=True, metavar="LO,HI")
    m.add_argument("-o", "--output", help="also write report.json here")
    m.set_defaults(func=cmd_min_time)

    a = sub.add_parser("algebra-check", help="structure constants and center of an algebra")
    a.add_argument("algebra", help="su2, u3s3 or a representation JSON file")
    a.set_defaults(func=cmd_algebra_check)

    b = sub.add_parser("batch", help="design several scenarios")
    b.add_argument("batch", help="JSON list of scenario files")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("-o", "--output", help="root output directory (default: batch_output)")
    b.set_defaults(func=cmd_batch)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0
    try:
        return args.func(args)
    except (StaError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
