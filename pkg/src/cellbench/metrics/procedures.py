"""Measurement procedures that drive the simulator: throughput searches, latency
ladders, burst-size search and goodput runs."""

from __future__ import annotations

import logging
import math
import random
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from ..aal import (
    CELL_BITS,
    LinkRate,
    ServiceClass,
    cells_per_frame,
    effective_rate_to_cell_rate,
)
from ..simulator.engine import LOST, Trace, routes_from_config, simulate
from ..simulator.model import InvalidSpecError, NetworkModel, Route, TrafficSpec
from ..topology import ConnectionConfig, max_min_allocation
from .fairness import fairness_index
from .latency import LatencyStats, frame_events, frame_table, latency_stats, mimo_from_events

__all__ = [
    "Scenario",
    "StreamResult",
    "RunResult",
    "ThroughputPoint",
    "PeakResult",
    "ThroughputResult",
    "MFBSResult",
    "LatencyPoint",
    "default_sweep_grid",
    "lossless_throughput",
    "peak_throughput",
    "full_load_throughput",
    "throughput_levels",
    "mfbs",
    "latency_ladder",
]

_log = logging.getLogger(__name__)

TICKS_PER_SECOND = 10**9


def default_sweep_grid(points: int = 21, lo: float = 0.05, hi: float = 1.0) -> tuple[float, ...]:
    """Geometric load grid from ``lo`` to ``hi`` inclusive."""
    if points < 2:
        return (hi,)
    ratio = (hi / lo) ** (1 / (points - 1))
    grid = [lo * ratio**i for i in range(points - 1)] + [hi]
    return tuple(grid)


@dataclass(frozen=True)
class StreamResult:
    """Frame counts refer to frames offered in the window; ``delivered_bps``
    counts frames whose output transmission lies inside the window."""

    vc_id: int
    leaf: int
    in_frames: int
    out_frames: int
    offered_bps: float
    delivered_bps: float
    ideal_bps: float


@dataclass
class RunResult:
    load: float
    payload_octets: int
    window: tuple[int, int]
    streams: list[StreamResult]
    cells_injected: int
    cells_delivered: int
    cells_dropped: int
    trace: Trace | None = None

    @property
    def in_frames(self) -> int:
        return sum(s.in_frames for s in self.streams)

    @property
    def out_frames(self) -> int:
        return sum(s.out_frames for s in self.streams)

    @property
    def offered_bps(self) -> float:
        return math.fsum(s.offered_bps for s in self.streams)

    @property
    def delivered_bps(self) -> float:
        return math.fsum(s.delivered_bps for s in self.streams)

    @property
    def lossless(self) -> bool:
        return self.out_frames == self.in_frames

    @property
    def flr(self) -> float:
        return (self.in_frames - self.out_frames) / self.in_frames if self.in_frames else 0.0

    @property
    def fairness(self) -> float:
        if not self.streams:
            return 1.0
        return fairness_index([s.delivered_bps for s in self.streams], [s.ideal_bps for s in self.streams])


@dataclass(frozen=True)
class Scenario:
    """A foreground connection configuration on a network, at one frame size.

    Each foreground source on an ingress link gets an equal share of
    ``load`` times that link's payload capacity.  Foreground frames are
    generated for ``duration`` ticks starting at ``fg_start``; the first
    ``warmup_fraction`` of that span is excluded from measurement.
    """

    network: NetworkModel
    config: ConnectionConfig
    payload_octets: int = 64
    duration: int = 2_000_000
    warmup_fraction: float = 0.1
    fg_start: int = 0
    seed: int = 0
    background: tuple[TrafficSpec, ...] = ()
    background_routes: Mapping[int, Route] = field(default_factory=dict)
    service_class: ServiceClass = ServiceClass.UBR
    switch: int = 0
    backend: str | None = None
    keep_trace: bool = False

    def __post_init__(self):
        if not 0 <= self.warmup_fraction < 1:
            raise ValueError("warmup_fraction must be in [0, 1)")
        if self.duration <= 0:
            raise ValueError("duration must be > 0")

    @property
    def routes(self) -> dict[int, Route]:
        return routes_from_config(self.config, self.network, self.switch)

    @property
    def window(self) -> tuple[int, int]:
        return (self.fg_start + int(self.duration * self.warmup_fraction), self.fg_start + self.duration)

    def source_rates(self, load: float) -> dict[int, float]:
        routes = self.routes
        sharing: dict[tuple[int, int], int] = {}
        for r in routes.values():
            sharing[r.ingress] = sharing.get(r.ingress, 0) + 1
        return {
            vid: load * self.network.rate(*r.ingress).payload_capacity(self.payload_octets) / sharing[r.ingress]
            for vid, r in routes.items()
        }

    def nominal_capacity(self) -> float:
        """Aggregate offered rate (per delivery stream) at 100% load."""
        routes = self.routes
        return math.fsum(rate * len(routes[v].leaves) for v, rate in self.source_rates(1.0).items())

    def foreground_traffic(self, load: float) -> list[TrafficSpec]:
        rng = random.Random(self.seed)
        specs = []
        for vid, rate in sorted(self.source_rates(load).items()):
            interval = 8 * self.payload_octets * TICKS_PER_SECOND / rate
            phase = int(rng.random() * interval)
            specs.append(TrafficSpec(
                vid, self.service_class, self.payload_octets, rate,
                start_tick=self.fg_start + phase, duration=max(1, self.duration - phase),
            ))
        return specs

    def run(self, load: float) -> RunResult:
        if not 0 < load <= 1:
            raise ValueError(f"load must be in (0, 1], got {load}")
        routes = dict(self.routes)
        routes.update(self.background_routes)
        fg = self.foreground_traffic(load)
        trace = simulate(self.network, None, fg + list(self.background), routes=routes,
                         backend=self.backend)
        return summarize(self, load, trace, [s.vc_id for s in fg])


def _links(network: NetworkModel, route: Route, leaf: int) -> list[int]:
    n = network.n_global_ports
    links = [] if len(route.leaves) > 1 else [network.gport(*route.ingress)]
    links.extend(n + network.gport(s, p) for s, p in route.leaves[leaf])
    return links


def summarize(scn: Scenario, load: float, trace: Trace, fg_vcs: Sequence[int]) -> RunResult:
    w0, w1 = scn.window
    fg_trace = trace.for_vcs(fg_vcs)
    table = frame_table(fg_trace)
    # A frame is offered in the window if all its bits entered inside it, and
    # counts toward throughput if all its bits left inside it.  This keeps the
    # measured rates within the link capacities for any window placement.
    in_win = (table.t1 >= w0) & (table.t2 <= w1)
    out_ct = np.array([fg_trace.port_rate(g).cell_time for g in table.out_port.tolist()], dtype=np.int64)
    out_win = table.delivered & (table.first_exit - out_ct >= w0) & (table.t3 <= w1)
    seconds = (w1 - w0) / TICKS_PER_SECOND
    bits = 8 * scn.payload_octets
    routes = scn.routes
    rates = scn.source_rates(load)
    keys = [(v, l) for v in sorted(fg_vcs) for l in range(len(routes[v].leaves))]

    offered, delivered, counts = [], [], []
    for v, l in keys:
        sel = in_win & (table.vc_id == v) & (table.leaf == l)
        stream = (table.vc_id == v) & (table.leaf == l)
        n_in = int(sel.sum())
        n_out = int((sel & table.delivered).sum())
        counts.append((n_in, n_out))
        offered.append(n_in * bits / seconds)
        delivered.append(int((stream & out_win).sum()) * bits / seconds)

    # Ideal shares: max-min over input and output link payload capacities.
    n = scn.network.n_global_ports
    caps = []
    for g in range(2 * n):
        s, p = scn.network.locate(g % n)
        caps.append(scn.network.rate(s, p).payload_capacity(scn.payload_octets))
    demands = [rates[v] for v, _ in keys]
    ideal = max_min_allocation(demands, caps, [_links(scn.network, routes[v], l) for v, l in keys])

    streams = [
        StreamResult(v, l, c[0], c[1], o, d, float(i))
        for (v, l), c, o, d, i in zip(keys, counts, offered, delivered, ideal)
    ]
    inj, dl, dr = fg_trace.counts()
    return RunResult(load, scn.payload_octets, (w0, w1), streams, inj, dl, dr,
                     trace if scn.keep_trace else None)


@dataclass(frozen=True)
class ThroughputPoint:
    rate: float  # delivered effective bits/s
    offered: float
    load: float
    run: RunResult | None = None
    below_floor: bool = False
    evaluations: int = 0


def lossless_throughput(scn: Scenario, eps: float | None = None) -> ThroughputPoint:
    """Bisection on offered load for the highest rate with zero frame loss.

    ``eps`` is the resolution in effective bits/s; the default is 0.1% of the
    first ingress link's payload capacity.  The returned point is itself a
    completed zero-loss run.
    """
    routes = scn.routes
    first = routes[min(routes)]
    link_cap = scn.network.rate(*first.ingress).payload_capacity(scn.payload_octets)
    if eps is None:
        eps = 0.001 * link_cap
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if eps > link_cap:
        raise ValueError(f"resolution {eps} exceeds the link payload capacity {link_cap}")
    step = eps / scn.nominal_capacity()
    evaluations = 1
    top = scn.run(1.0)
    if top.lossless:
        return ThroughputPoint(top.delivered_bps, top.offered_bps, 1.0, top, evaluations=evaluations)
    lo_load = min(step, 1.0)
    lo = scn.run(lo_load)
    evaluations += 1
    if not lo.lossless:
        _log.warning("loss already at the minimum probe load %.3g", lo_load)
        return ThroughputPoint(0.0, lo.offered_bps, lo_load, lo, below_floor=True, evaluations=evaluations)
    hi_load = 1.0
    while hi_load - lo_load > step:
        mid = (lo_load + hi_load) / 2
        r = scn.run(mid)
        evaluations += 1
        if r.lossless:
            lo_load, lo = mid, r
        else:
            hi_load = mid
    return ThroughputPoint(lo.delivered_bps, lo.offered_bps, lo_load, lo, evaluations=evaluations)


@dataclass(frozen=True)
class PeakResult:
    rate: float
    offered: float
    load: float
    grid: tuple[float, ...]
    evaluated: tuple[tuple[float, float], ...]  # (load, delivered) pairs in evaluation order
    run: RunResult | None = None


_GOLDEN = (math.sqrt(5) - 1) / 2


def peak_throughput(scn: Scenario, grid: Sequence[float] | None = None, refine_steps: int = 6,
                    extra_loads: Sequence[float] = ()) -> PeakResult:
    """Highest delivered rate over a load sweep, refined by golden-section search."""
    grid = tuple(default_sweep_grid() if grid is None else grid)
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[-1] > 1 or grid[0] <= 0:
        raise ValueError("sweep grid must be non-empty, increasing and within (0, 1]")
    cache: dict[float, RunResult] = {}
    order: list[tuple[float, float]] = []

    def f(load: float) -> float:
        if load not in cache:
            cache[load] = scn.run(load)
            order.append((load, cache[load].delivered_bps))
        return cache[load].delivered_bps

    for load in grid:
        f(load)
    i = max(range(len(grid)), key=lambda j: (f(grid[j]), -j))
    a = grid[i - 1] if i > 0 else grid[i]
    b = grid[i + 1] if i + 1 < len(grid) else grid[i]
    if b > a:
        c, d = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
        for _ in range(refine_steps):
            if f(c) >= f(d):
                b, d = d, c
                c = b - _GOLDEN * (b - a)
            else:
                a, c = c, d
                d = a + _GOLDEN * (b - a)
    for load in extra_loads:
        f(load)
    best = max(cache, key=lambda L: (cache[L].delivered_bps, -L))
    r = cache[best]
    return PeakResult(r.delivered_bps, r.offered_bps, best, grid, tuple(order), r)


def full_load_throughput(scn: Scenario) -> ThroughputPoint:
    r = scn.run(1.0)
    return ThroughputPoint(r.delivered_bps, r.offered_bps, 1.0, r, evaluations=1)


@dataclass(frozen=True)
class ThroughputResult:
    lossless: ThroughputPoint
    peak: PeakResult
    full_load: ThroughputPoint

    @property
    def peak_flr(self) -> float:
        return self.peak.run.flr

    @property
    def full_load_flr(self) -> float:
        return self.full_load.run.flr


def throughput_levels(scn: Scenario, eps: float | None = None, grid: Sequence[float] | None = None,
                      refine_steps: int = 6) -> ThroughputResult:
    lossless = lossless_throughput(scn, eps)
    full = full_load_throughput(scn)
    # lossless and full-load runs are measurements at known loads, so they are peak candidates too
    peak = peak_throughput(scn, grid, refine_steps, extra_loads=(lossless.load,))
    return ThroughputResult(lossless, peak, full)


@dataclass(frozen=True)
class MFBSResult:
    frames: int
    payload_octets: int
    unbounded: bool
    ceiling: int
    evaluations: tuple[tuple[int, bool], ...] = ()

    @property
    def octets(self) -> int | None:
        return None if self.unbounded else self.frames * self.payload_octets


def mfbs(scn: Scenario, payload_octets: int | None = None, peak_rate: float | None = None,
         ceiling: int = 1 << 16) -> MFBSResult:
    """Largest back-to-back burst of frames at ``peak_rate`` delivered without loss.

    The burst is increased (doubling, then bisection) until a loss appears; the
    result is loss-free and one more frame is lossy.
    """
    P = scn.payload_octets if payload_octets is None else payload_octets
    routes = scn.routes
    vid = min(routes)
    route = routes[vid]
    in_rate = scn.network.rate(*route.ingress)
    if peak_rate is None:
        peak_rate = in_rate.payload_capacity(P)
    src_cells = effective_rate_to_cell_rate(peak_rate, P)
    drain = min(scn.network.rate(s, p).cells_per_second for leaf in route.leaves for s, p in leaf)
    if not scn.background and src_cells <= drain * (1 + 1e-12):
        return MFBSResult(0, P, True, ceiling)

    all_routes = {vid: route, **scn.background_routes}
    seen: dict[int, bool] = {}

    def loss_free(n: int) -> bool:
        if n not in seen:
            spec = TrafficSpec(vid, scn.service_class, P, peak_rate, start_tick=scn.fg_start, burst_frames=n)
            tr = simulate(scn.network, None, [spec, *scn.background], routes=all_routes, backend=scn.backend)
            fg = tr.vc_id == vid
            seen[n] = bool(tr.delivered[fg].all())
        return seen[n]

    if not loss_free(1):
        return MFBSResult(0, P, False, ceiling, tuple(seen.items()))
    good, bad = 1, None
    while bad is None:
        probe = good * 2
        if probe > ceiling:
            if loss_free(ceiling):
                return MFBSResult(ceiling, P, True, ceiling, tuple(seen.items()))
            bad = ceiling
        elif loss_free(probe):
            good = probe
        else:
            bad = probe
    while bad - good > 1:
        mid = (good + bad) // 2
        if loss_free(mid):
            good = mid
        else:
            bad = mid
    return MFBSResult(good, P, False, ceiling, tuple(seen.items()))


@dataclass(frozen=True)
class LatencyPoint:
    rate: float
    stats: LatencyStats
    latencies: tuple[float, ...]


def latency_ladder(
    network: NetworkModel,
    fg_route: Route,
    payload_octets: int,
    ffl_effective: float,
    *,
    vc_id: int = 0,
    start_rate: float | None = None,
    factor: float = 2.0,
    p: int = 1000,
    warmup_frames: int = 100,
    alpha: float = 0.05,
    background: Sequence[TrafficSpec] = (),
    background_routes: Mapping[int, Route] | None = None,
    fg_start: int = 0,
    backend: str | None = None,
) -> list[LatencyPoint]:
    """MIMO latency of p consecutive foreground frames at increasing rates.

    Starts at ``start_rate`` and multiplies by ``factor`` up to the full
    foreground load, stopping after the first rate that loses a frame.
    Background sources are expected to start no later than ``fg_start``.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    if factor <= 1:
        raise ValueError("ladder factor must be > 1")
    if start_rate is None:
        start_rate = ffl_effective * 0.05
    if not 0 < start_rate <= ffl_effective:
        raise ValueError("start rate must be in (0, FFL]")
    routes = {vc_id: fg_route, **(background_routes or {})}
    points = []
    rate = start_rate
    while True:
        spec = TrafficSpec(vc_id, ServiceClass.UBR, payload_octets, rate, start_tick=fg_start,
                           frame_count=warmup_frames + p)
        trace = simulate(network, None, [spec, *background], routes=routes, backend=backend)
        fg = trace.for_vcs([vc_id])
        table = frame_table(fg)
        events = frame_events(fg, table)
        order = np.argsort(table.frame_id, kind="stable")
        window = [mimo_from_events(events[i]) for i in order[warmup_frames:warmup_frames + p]]
        stats = latency_stats(window, alpha)
        points.append(LatencyPoint(rate, stats, tuple(window)))
        if not stats.bounded or rate >= ffl_effective:
            break
        rate = min(rate * factor, ffl_effective)
    return points
