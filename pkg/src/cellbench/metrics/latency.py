"""MIMO frame latency: from frame events and from cell-level monitor readings."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from ..aal import LinkRate, cells_per_frame, round_half_up
from ..simulator.engine import LOST, Trace, monitor_ctd
from ..simulator.model import MonitorModel

__all__ = [
    "UNBOUNDED",
    "CalibrationError",
    "FrameEvents",
    "FrameTable",
    "LatencyStats",
    "nfot",
    "mimo_from_events",
    "mimo_from_cells_slow_input",
    "mimo_from_cells_fast_input",
    "mimo_from_cell_readings",
    "frame_table",
    "frame_events",
    "latency_stats",
    "z_quantile",
    "call_establishment_latency",
]

UNBOUNDED = math.inf


class CalibrationError(ValueError):
    """Cell-level reconstruction produced a negative latency: the monitor overhead is wrong."""


def _bps(rate: LinkRate | int) -> int:
    return rate.bits_per_second if isinstance(rate, LinkRate) else int(rate)


def _cell_time(rate: LinkRate | int) -> int:
    return (rate if isinstance(rate, LinkRate) else LinkRate(int(rate))).cell_time


@dataclass(frozen=True)
class FrameEvents:
    t1: int  # first bit enters the system
    t2: int  # last bit enters
    t3: int | None  # last bit exits; None when lost
    input_rate: LinkRate
    output_rate: LinkRate

    def __post_init__(self):
        if self.t2 < self.t1:
            raise ValueError(f"invalid trace: last bit entered before first bit ({self.t2} < {self.t1})")
        if self.t3 is not None and self.t3 < self.t2:
            raise ValueError("invalid trace: frame left before it arrived")


def nfot(fit: int, input_rate: LinkRate | int, output_rate: LinkRate | int) -> int:
    """Nominal frame output time: input time scaled by the input/output rate ratio."""
    if fit < 0:
        raise ValueError("fit must be >= 0")
    i, o = _bps(input_rate), _bps(output_rate)
    if i <= 0 or o <= 0:
        raise ValueError("rates must be > 0")
    return round_half_up(fit * i, o)


def mimo_from_events(e: FrameEvents) -> float | int:
    if e.t3 is None:
        return UNBOUNDED
    lilo = e.t3 - e.t2
    filo = e.t3 - e.t1
    return min(lilo, filo - nfot(e.t2 - e.t1, e.input_rate, e.output_rate))


def mimo_from_cells_slow_input(last_ctd: int, input_rate: LinkRate | int, monitor: MonitorModel) -> int:
    """Input link no faster than output: only the last cell's transfer delay is needed."""
    m = last_ctd - (_cell_time(input_rate) + monitor.overhead + monitor.propagation)
    if m < 0:
        raise CalibrationError(f"negative latency {m}: check the monitor overhead")
    return m


def mimo_from_cells_fast_input(
    first_ctd: int,
    first_last_interarrival: int,
    input_rate: LinkRate | int,
    output_rate: LinkRate | int,
    fit: int,
    monitor: MonitorModel,
) -> int:
    """Input link no slower than output: first cell delay plus first-to-last spacing."""
    out_ct = _cell_time(output_rate)
    fifo = first_ctd - (out_ct + monitor.overhead + monitor.propagation)
    folo = first_last_interarrival + out_ct
    m = fifo + folo - nfot(fit, input_rate, output_rate)
    if m < 0:
        raise CalibrationError(f"negative latency {m}: check the monitor overhead")
    return m


@dataclass
class FrameTable:
    """Per (vc, leaf, frame) summary of a trace, one row per frame delivery stream."""

    vc_id: np.ndarray
    leaf: np.ndarray
    frame_id: np.ndarray
    payload: np.ndarray
    expected_cells: np.ndarray
    received_cells: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    t3: np.ndarray  # LOST (-1) when any cell is missing
    first_exit: np.ndarray  # last bit of the first cell out (LOST if lost)
    in_port: np.ndarray
    out_port: np.ndarray
    first_idx: np.ndarray  # trace row of the first / last cell of the frame
    last_idx: np.ndarray

    def __len__(self):
        return len(self.frame_id)

    @property
    def delivered(self) -> np.ndarray:
        return self.t3 != LOST

    def rows(self, mask) -> "FrameTable":
        return FrameTable(**{k: v[mask] for k, v in self.__dict__.items()})


def frame_table(trace: Trace) -> FrameTable:
    keep = trace.frame_id >= 0
    rows = np.flatnonzero(keep)
    vc, leaf, fid = trace.vc_id[keep], trace.leaf[keep], trace.frame_id[keep]
    seq = trace.seq[keep]
    order = np.lexsort((seq, fid, leaf, vc))
    vc, leaf, fid, seq = vc[order], leaf[order], fid[order], seq[order]
    rows = rows[order]
    ef = trace.entry_first[keep][order]
    el = trace.entry_last[keep][order]
    ex = trace.exit_last[keep][order]
    inp = trace.in_port[keep][order]
    outp = trace.out_port[keep][order]
    if vc.size == 0:
        z = np.zeros(0, dtype=np.int64)
        return FrameTable(*([z] * 14))
    brk = np.flatnonzero((np.diff(vc) != 0) | (np.diff(leaf) != 0) | (np.diff(fid) != 0)) + 1
    starts = np.r_[0, brk]
    ends = np.r_[brk, vc.size]
    gf = fid[starts]
    payload = np.array([trace.frame_payload[int(f)] for f in gf.tolist()], dtype=np.int64)
    expected = np.array([cells_per_frame(int(p)) for p in payload.tolist()], dtype=np.int64)
    received = np.add.reduceat((ex != LOST).astype(np.int64), starts)
    counts = ends - starts
    if np.any(counts != expected):
        from ..aal import TraceCorruptionError

        raise TraceCorruptionError("frame with missing or duplicate cell records in trace")
    t3 = np.maximum.reduceat(ex, starts)
    t3 = np.where(received == expected, t3, LOST)
    first_exit = np.where(received == expected, ex[starts], LOST)
    return FrameTable(
        vc_id=vc[starts], leaf=leaf[starts], frame_id=gf, payload=payload,
        expected_cells=expected, received_cells=received,
        t1=ef[starts], t2=np.maximum.reduceat(el, starts), t3=t3,
        first_exit=first_exit, in_port=inp[starts], out_port=outp[starts],
        first_idx=rows[starts], last_idx=rows[ends - 1],
    )


def frame_events(trace: Trace, table: FrameTable | None = None) -> list[FrameEvents]:
    table = frame_table(trace) if table is None else table
    out = []
    rate_cache: dict[int, LinkRate] = {}

    def rate(g):
        if g not in rate_cache:
            rate_cache[g] = trace.port_rate(g)
        return rate_cache[g]

    for i in range(len(table)):
        t3 = int(table.t3[i])
        out.append(FrameEvents(int(table.t1[i]), int(table.t2[i]), None if t3 == LOST else t3,
                               rate(int(table.in_port[i])), rate(int(table.out_port[i]))))
    return out


def mimo_from_cell_readings(trace: Trace, table: FrameTable, row: int, monitor: MonitorModel) -> float | int:
    """MIMO latency of one frame using only what a cell-level monitor reports.

    The monitor reading of a cell is its switch-level transfer delay plus the
    monitor overhead and measurement-loop propagation.
    """
    first, last = int(table.first_idx[row]), int(table.last_idx[row])
    last_ctd = monitor_ctd(trace, last, monitor)
    first_ctd = monitor_ctd(trace, first, monitor)
    if last_ctd is None or first_ctd is None or table.received_cells[row] != table.expected_cells[row]:
        return UNBOUNDED
    rin = trace.port_rate(int(trace.in_port[last]))
    rout = trace.port_rate(int(trace.out_port[last]))
    if rin.bits_per_second <= rout.bits_per_second:
        return mimo_from_cells_slow_input(last_ctd, rin, monitor)
    # cell inter-arrival times are taken between last bits at the analyzer
    interarrival = int(trace.exit_last[last]) - int(trace.exit_last[first])
    # the generator knows its own input pattern
    fit = int(trace.entry_last[last]) - int(trace.entry_first[first])
    return mimo_from_cells_fast_input(first_ctd, interarrival, rin, rout, fit, monitor)


def z_quantile(alpha: float) -> float:
    """(1 - alpha/2) quantile of the unit normal distribution."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return NormalDist().inv_cdf(1 - alpha / 2)


@dataclass(frozen=True)
class LatencyStats:
    p: int
    mean: float
    stddev: float
    stderr: float
    ci: tuple[float, float]
    alpha: float
    lost_in_window: int = 0

    @property
    def bounded(self) -> bool:
        return self.lost_in_window == 0


def latency_stats(latencies: Sequence[float], alpha: float = 0.05) -> LatencyStats:
    """Mean, sample standard deviation, standard error and normal CI of p latencies.

    A lost frame (infinite latency) makes the whole window unbounded.
    """
    p = len(latencies)
    if p < 2:
        raise ValueError(f"need at least 2 latencies, got {p}")
    z = z_quantile(alpha)
    lost = sum(1 for m in latencies if math.isinf(m))
    if lost:
        inf = math.inf
        return LatencyStats(p, inf, inf, inf, (inf, inf), alpha, lost)
    mean = math.fsum(latencies) / p
    var = math.fsum((m - mean) ** 2 for m in latencies) / (p - 1)
    sd = math.sqrt(var)
    se = sd / math.sqrt(p)
    return LatencyStats(p, mean, sd, se, (mean - z * se, mean + z * se), alpha, 0)


def _only_signaling_frame(trace: Trace) -> float | int:
    table = frame_table(trace)
    if len(table) != 1:
        raise ValueError(f"expected exactly one signaling frame, trace has {len(table)}")
    return mimo_from_events(frame_events(trace, table)[0])


def call_establishment_latency(setup_trace: Trace, connect_trace: Trace) -> float | int:
    """Setup message MIMO latency plus connect message MIMO latency."""
    return _only_signaling_frame(setup_trace) + _only_signaling_frame(connect_trace)
