"""Report formats: human table, delimited rows (CSV) and structured records (JSONL).

CSV and JSONL share one record layout, ``REPORT_FIELDS``, in a fixed order.
Each record is tagged ``spec`` (one setting of the resolved test spec),
``run`` (one run of the matrix) or ``aggregate``.  Floats are written with
``repr`` so they read back bit-exact; infinities are written as ``inf``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from .run import AGG_FIELDS, RUN_FIELDS, UNITS, MetricReport

__all__ = [
    "REPORT_FIELDS",
    "ReportData",
    "report_records",
    "format_csv",
    "format_jsonl",
    "format_table",
    "emit_report",
    "read_report",
]

REPORT_FIELDS = ("record",) + RUN_FIELDS[:-1] + ("metric", "value", "n_runs")
_INT_FIELDS = {"run_id", "frame_size", "rep", "in_frames", "out_frames", "p", "n_runs"}
_FLOAT_FIELDS = {"load", "offered_bps", "delivered_bps", "flr", "fairness",
                 "lat_mean", "lat_stddev", "lat_stderr", "lat_ci_lo", "lat_ci_hi"}
_FILES = {"table": "report.txt", "csv": "report.csv", "jsonl": "report.jsonl"}

MODEL_NOTE = "system under test: reference output-queued cell switch model (simulated)"


def _spec_items(spec) -> list[tuple[str, str]]:
    items, prefix = [], ""
    for line in spec.canonical_lines():
        if line.startswith("["):
            prefix = line[1:-1] + "."
            continue
        key, value = line.split(" = ", 1)
        items.append((prefix + key, value))
    return items


def report_records(report: MetricReport) -> list[dict]:
    recs = []
    for key, value in _spec_items(report.spec):
        recs.append({**dict.fromkeys(REPORT_FIELDS), "record": "spec", "metric": key, "value": value})
    for row in report.runs:
        recs.append({**dict.fromkeys(REPORT_FIELDS), "record": "run", **row})
    for agg in report.aggregates:
        recs.append({**dict.fromkeys(REPORT_FIELDS), "record": "aggregate", **agg})
    return [{k: r[k] for k in REPORT_FIELDS} for r in recs]


def _text(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "inf" if v == math.inf else "-inf" if v == -math.inf else repr(v)
    return str(v)


def format_csv(report: MetricReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for rec in report_records(report):
        w.writerow([_text(rec[k]) for k in REPORT_FIELDS])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, float) and math.isinf(v):
        return _text(v)
    return v


def format_jsonl(report: MetricReport) -> str:
    lines = []
    for rec in report_records(report):
        lines.append(json.dumps({k: _json_value(rec[k]) for k in REPORT_FIELDS}, allow_nan=False))
    return "\n".join(lines) + "\n"


def _cell(v, width: int) -> str:
    if v is None:
        s = "-"
    elif isinstance(v, float):
        s = "inf" if math.isinf(v) else f"{v:.6g}"
    else:
        s = str(v)
    return s[:width].ljust(width)


def _table(columns: list[tuple[str, int]], rows: list[list]) -> list[str]:
    out = ["  ".join(name[:w].ljust(w) for name, w in columns).rstrip()]
    out.append("  ".join("-" * w for _, w in columns))
    for row in rows:
        out.append("  ".join(_cell(v, w) for v, (_, w) in zip(row, columns)).rstrip())
    return out


def format_table(report: MetricReport) -> str:
    """Human-readable report; aggregates grouped by metric, then frame size."""
    out = ["cellbench report", MODEL_NOTE, "", "test spec:"]
    out += [f"  {k} = {v}" for k, v in _spec_items(report.spec)]
    if report.aggregates:
        out += ["", "aggregates:"]
        metric_order = {}
        for a in report.aggregates:
            metric_order.setdefault(a["metric"], len(metric_order))
        aggs = sorted(report.aggregates, key=lambda a: (metric_order[a["metric"]], a["frame_size"]))
        cols = [("metric", 18), ("frame size", 10), ("config", 14), ("value", 14),
                ("unit", 26), ("runs", 4)]
        rows = [[a["metric"], a["frame_size"], a["config"], a["value"],
                 UNITS.get(a["metric"].split("@")[0], ""), a["n_runs"]] for a in aggs]
        out += _table(cols, rows)
    for suite in ("throughput", "latency", "mfbs", "call", "goodput"):
        runs = [r for r in report.runs if r["suite"] == suite]
        if not runs:
            continue
        runs.sort(key=lambda r: (r["frame_size"], r["run_id"]))
        out += ["", f"{suite} runs (rates in effective payload bits/sec):"]
        if suite == "latency":
            cols = [("run", 5), ("frame size", 10), ("config", 14), ("rep", 3), ("rung", 6),
                    ("rate", 14), ("p", 6), ("mean ticks", 14), ("stddev", 12), ("ci lo", 14), ("ci hi", 14)]
            rows = [[r["run_id"], r["frame_size"], r["config"], r["rep"], r["phase"], r["offered_bps"],
                     r["p"], r["lat_mean"], r["lat_stddev"], r["lat_ci_lo"], r["lat_ci_hi"]] for r in runs]
        else:
            cols = [("run", 5), ("frame size", 10), ("config", 14), ("rep", 3), ("phase", 22),
                    ("load", 8), ("offered", 14), ("delivered", 14), ("in", 8), ("out", 8),
                    ("flr", 10), ("fairness", 10), ("value", 12)]
            rows = [[r["run_id"], r["frame_size"], r["config"], r["rep"], r["phase"], r["load"],
                     r["offered_bps"], r["delivered_bps"], r["in_frames"], r["out_frames"], r["flr"],
                     r["fairness"], r["value"]] for r in runs]
        out += _table(cols, rows)
    return "\n".join(out) + "\n"


_FORMATTERS = {"table": format_table, "csv": format_csv, "jsonl": format_jsonl}


def emit_report(report: MetricReport, outdir, formats=("table", "csv", "jsonl")) -> list[Path]:
    """Write the selected formats into ``outdir``; returns the written paths."""
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {outdir}: {exc}") from exc
    written = []
    for fmt in formats:
        path = outdir / _FILES[fmt]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_FORMATTERS[fmt](report))
        written.append(path)
    return written


# ---- reading back --------------------------------------------------------------

class ReportData:
    def __init__(self, spec_items, runs, aggregates):
        self.spec_items: list[tuple[str, str]] = spec_items
        self.runs: list[dict] = runs
        self.aggregates: list[dict] = aggregates


def _parse_value(v):
    if v is None or isinstance(v, (int, float)):
        return v
    if v == "":
        return None
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def _typed(rec: dict) -> dict:
    out = {}
    for k, v in rec.items():
        if v == "" or v is None:
            out[k] = None
        elif k in _INT_FIELDS:
            out[k] = int(v)
        elif k in _FLOAT_FIELDS:
            out[k] = float(v)
        elif k == "value" and rec.get("record") != "spec":
            out[k] = _parse_value(v)
        else:
            out[k] = v
    return out


def read_report(path) -> ReportData:
    """Read a CSV or JSONL report written by ``emit_report``."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.suffix == ".jsonl":
        raw = [json.loads(line) for line in text.splitlines() if line.strip()]
    else:
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != REPORT_FIELDS:
            raise ValueError(f"{path}: header does not match the report layout")
        raw = list(reader)
    spec_items, runs, aggs = [], [], []
    for lineno, rec in enumerate(raw, 1):
        if set(rec) != set(REPORT_FIELDS):
            raise ValueError(f"{path}: record {lineno} has fields {sorted(rec)}")
        rec = _typed(rec)
        kind = rec["record"]
        if kind == "spec":
            spec_items.append((rec["metric"], rec["value"]))
        elif kind == "run":
            runs.append({k: rec[k] for k in RUN_FIELDS})
        elif kind == "aggregate":
            aggs.append({k: rec[k] for k in AGG_FIELDS})
        else:
            raise ValueError(f"{path}: record {lineno} has unknown tag {kind!r}")
    return ReportData(spec_items, runs, aggs)
