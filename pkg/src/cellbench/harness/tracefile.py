"""Trace file: one cell record per line, tab separated, fixed field order.

Lost cells carry ``LOST`` in the exit column.  The first line is a header
naming the fields.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator
from pathlib import Path

from ..simulator.engine import CellRecord, Trace

__all__ = ["TRACE_FIELDS", "write_trace", "read_trace", "format_record", "parse_record"]

TRACE_FIELDS = (
    "vc_id", "frame_id", "seq_in_frame", "is_first", "is_last",
    "entry_first_bit", "entry_last_bit", "exit_last_bit", "leaf", "out_port",
)
HEADER = "# " + "\t".join(TRACE_FIELDS)


def format_record(rec: CellRecord) -> str:
    vals = []
    for name in TRACE_FIELDS:
        v = getattr(rec, name)
        if v is None:
            vals.append("LOST")
        elif isinstance(v, bool):
            vals.append("1" if v else "0")
        else:
            vals.append(str(v))
    return "\t".join(vals)


def parse_record(line: str) -> CellRecord:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != len(TRACE_FIELDS):
        raise ValueError(f"expected {len(TRACE_FIELDS)} fields, got {len(parts)}")
    kw = {}
    for name, raw in zip(TRACE_FIELDS, parts):
        if name == "exit_last_bit" and raw == "LOST":
            kw[name] = None
        elif name in ("is_first", "is_last"):
            if raw not in ("0", "1"):
                raise ValueError(f"{name} must be 0 or 1, got {raw!r}")
            kw[name] = raw == "1"
        else:
            kw[name] = int(raw)
    return CellRecord(**kw)


def write_trace(trace: Trace | Iterable[CellRecord], path) -> int:
    records = trace.records() if isinstance(trace, Trace) else trace
    n = 0
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(HEADER + "\n")
        for rec in records:
            fh.write(format_record(rec) + "\n")
            n += 1
    return n


def read_trace(path) -> Iterator[CellRecord]:
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.startswith("#") or not line.strip():
                continue
            try:
                yield parse_record(line)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
