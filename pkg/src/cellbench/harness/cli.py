"""Command-line entry point.

Exit codes: 0 success, 1 spec error, 2 runtime error, 3 expectation failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .report import emit_report, read_report
from .run import RunError, check_expectations, derive_aggregates, run_suite
from .spec import FORMATS, SpecError, expand_throughput_matrix, load_spec, with_overrides

EXIT_OK, EXIT_SPEC, EXIT_RUNTIME, EXIT_THRESHOLD = 0, 1, 2, 3

_log = logging.getLogger("cellbench")


def _formats(text: str) -> tuple[str, ...]:
    vals = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [v for v in vals if v not in FORMATS]
    if bad or not vals:
        raise argparse.ArgumentTypeError(f"formats must be drawn from {', '.join(FORMATS)}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cellbench", description="Frame-level cell switch benchmarks.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a test spec and write reports")
    run.add_argument("spec", type=Path)
    run.add_argument("-o", "--output", type=Path, help="output directory (overrides the spec file)")
    run.add_argument("--seed", type=int, help="seed override")
    run.add_argument("--format", type=_formats, dest="formats", help="comma list of table,csv,jsonl")
    run.add_argument("--repetitions", type=int, help="repetition override")
    run.add_argument("--backend", choices=("auto", "cython", "python"), default="auto")

    val = sub.add_parser("validate", help="parse a test spec and print it with defaults resolved")
    val.add_argument("spec", type=Path)
    val.add_argument("--seed", type=int)
    val.add_argument("--repetitions", type=int)

    der = sub.add_parser("derive", help="recompute aggregates from the per-run rows of a report")
    der.add_argument("report", type=Path, help="report.csv or report.jsonl")
    return ap


def _load(args):
    spec = load_spec(args.spec)
    return with_overrides(
        spec, seed=args.seed, repetitions=args.repetitions,
        formats=getattr(args, "formats", None),
        output=str(args.output) if getattr(args, "output", None) else None,
    )


def cmd_validate(args) -> int:
    spec = _load(args)
    sys.stdout.write(spec.canonical_text())
    print(f"# throughput ladder runs: {len(expand_throughput_matrix(spec))}")
    return EXIT_OK


def cmd_run(args) -> int:
    spec = _load(args)
    outdir = Path(spec.output)
    try:
        report = run_suite(spec, outdir, backend=args.backend)
    except RunError as exc:
        _log.error("%s", exc)
        return EXIT_RUNTIME
    try:
        paths = emit_report(report, outdir, spec.formats)
    except OSError as exc:
        _log.error("%s", exc)
        return EXIT_RUNTIME
    for p in paths:
        print(p)
    problems = check_expectations(report)
    for msg in problems:
        _log.error("%s", msg)
    return EXIT_THRESHOLD if problems else EXIT_OK


def cmd_derive(args) -> int:
    try:
        data = read_report(args.report)
    except (OSError, ValueError) as exc:
        _log.error("%s", exc)
        return EXIT_SPEC
    derived = derive_aggregates(data.runs)
    for a in derived:
        print(f"{a['suite']}\t{a['config']}\t{a['frame_size']}\t{a['metric']}\t{a['value']!r}\t{a['n_runs']}")
    if derived != data.aggregates:
        _log.error("shipped aggregates differ from those derived from the run rows")
        return EXIT_RUNTIME
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": cmd_run, "validate": cmd_validate, "derive": cmd_derive}
    try:
        return handlers[args.command](args)
    except SpecError as exc:
        _log.error("spec error: %s", exc)
        return EXIT_SPEC
    except OSError as exc:
        _log.error("%s", exc)
        return EXIT_SPEC if args.command != "run" else EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
