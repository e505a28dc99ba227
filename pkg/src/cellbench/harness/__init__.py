"""Test specs, run matrix, report files and the command-line interface."""

from .report import emit_report, format_csv, format_jsonl, format_table, read_report
from .run import MetricReport, RunError, check_expectations, derive_aggregates, run_suite
from .spec import SpecError, TestSpec, expand_throughput_matrix, load_spec, parse_spec
from .tracefile import read_trace, write_trace

__all__ = [
    "MetricReport",
    "RunError",
    "SpecError",
    "TestSpec",
    "check_expectations",
    "derive_aggregates",
    "emit_report",
    "expand_throughput_matrix",
    "format_csv",
    "format_jsonl",
    "format_table",
    "load_spec",
    "parse_spec",
    "read_report",
    "read_trace",
    "run_suite",
    "write_trace",
]
