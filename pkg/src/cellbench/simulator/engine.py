"""Traffic generation, the simulation driver and the cell-level trace."""

from __future__ import annotations

import logging
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from ..aal import CELL_PAYLOAD_OCTETS, LinkRate, ServiceClass, cells_per_frame, round_half_up
from ..topology import ConnectionConfig
from . import kernel
from .model import MONITOR, InvalidSpecError, MonitorModel, NetworkModel, Route, TrafficSpec

__all__ = [
    "CellRecord",
    "Trace",
    "simulate",
    "routes_from_config",
    "reverse_route",
    "run_signaling_exchange",
    "calibrate_monitor_overhead",
    "monitor_ctd",
]

_log = logging.getLogger(__name__)

LOST = -1
PS_PER_TICK = 1000
_CLASS_CODE = {ServiceClass.CBR: 0, ServiceClass.UBR: 1, ServiceClass.SIGNALING: 1}


@dataclass(frozen=True)
class CellRecord:
    vc_id: int
    frame_id: int
    seq_in_frame: int
    is_first: bool
    is_last: bool
    entry_first_bit: int
    entry_last_bit: int
    exit_last_bit: int | None  # None when the cell was lost
    leaf: int = 0
    out_port: int = 0

    @property
    def lost(self) -> bool:
        return self.exit_last_bit is None

    @property
    def transfer_delay(self) -> int | None:
        """First bit in to last bit out, as seen at the switch ports."""
        if self.exit_last_bit is None:
            return None
        return self.exit_last_bit - self.entry_first_bit


@dataclass
class Trace:
    """Column-oriented cell trace: one row per delivered-or-dropped cell copy."""

    network: NetworkModel
    vc_id: np.ndarray
    frame_id: np.ndarray
    seq: np.ndarray
    is_first: np.ndarray
    is_last: np.ndarray
    leaf: np.ndarray
    entry_first: np.ndarray
    entry_last: np.ndarray
    exit_last: np.ndarray
    in_port: np.ndarray
    out_port: np.ndarray
    drop_port: np.ndarray
    frame_payload: dict[int, int] = field(default_factory=dict)
    frame_class: dict[int, ServiceClass] = field(default_factory=dict)
    backend: str = ""

    def __len__(self) -> int:
        return len(self.vc_id)

    @property
    def delivered(self) -> np.ndarray:
        return self.exit_last != LOST

    def records(self) -> Iterator[CellRecord]:
        for i in range(len(self)):
            ex = int(self.exit_last[i])
            yield CellRecord(
                int(self.vc_id[i]), int(self.frame_id[i]), int(self.seq[i]),
                bool(self.is_first[i]), bool(self.is_last[i]),
                int(self.entry_first[i]), int(self.entry_last[i]),
                None if ex == LOST else ex, int(self.leaf[i]), int(self.out_port[i]),
            )

    def subset(self, mask: np.ndarray) -> "Trace":
        cols = {name: getattr(self, name)[mask] for name in _COLUMNS}
        return Trace(self.network, **cols, frame_payload=self.frame_payload,
                     frame_class=self.frame_class, backend=self.backend)

    def for_vcs(self, vc_ids) -> "Trace":
        return self.subset(np.isin(self.vc_id, np.asarray(list(vc_ids), dtype=np.int64)))

    def rebased(self, origin: int) -> "Trace":
        """Same trace with all timestamps shifted so that ``origin`` becomes 0."""
        t = self.subset(np.ones(len(self), dtype=bool))
        t.entry_first = self.entry_first - origin
        t.entry_last = self.entry_last - origin
        t.exit_last = np.where(self.delivered, self.exit_last - origin, LOST)
        return t

    def counts(self, vc_id: int | None = None) -> tuple[int, int, int]:
        """(injected, delivered, dropped) cell copies, for one VC or globally."""
        mask = slice(None) if vc_id is None else self.vc_id == vc_id
        dl = self.delivered[mask]
        return int(dl.size), int(dl.sum()), int((self.drop_port[mask] != -1).sum())

    def port_rate(self, gport: int) -> LinkRate:
        return self.network.rate(*self.network.locate(int(gport)))

    def same_as(self, other: "Trace") -> bool:
        return all(np.array_equal(getattr(self, n), getattr(other, n)) for n in _COLUMNS)


_COLUMNS = ("vc_id", "frame_id", "seq", "is_first", "is_last", "leaf", "entry_first",
            "entry_last", "exit_last", "in_port", "out_port", "drop_port")


def routes_from_config(config: ConnectionConfig, network: NetworkModel, switch: int = 0) -> dict[int, Route]:
    """One route per source VC.  Loopback chains become a single multi-hop route
    keyed by the chain's first vc_id."""
    routes = {}
    if config.chains:
        for chain in config.chains:
            first = config.vc(chain[0])
            hops = []
            for i, vid in enumerate(chain):
                vc = config.vc(vid)
                if len(vc.output_ports) > 1:
                    if len(chain) != 1:
                        raise InvalidSpecError("multicast VCs cannot be chained")
                    break
                if i and vc.input_port != hops[-1][1]:
                    raise InvalidSpecError(f"chain breaks at VC {vid}")
                hops.append((switch, vc.output_ports[0]))
            if len(chain) == 1 and first.is_multicast:
                leaves = tuple(((switch, o),) for o in first.output_ports)
            else:
                leaves = (tuple(hops),)
            routes[first.vc_id] = Route((switch, first.input_port), leaves)
        return routes
    for vc in config.vcs:
        routes[vc.vc_id] = Route((switch, vc.input_port), tuple(((switch, o),) for o in vc.output_ports))
    return routes


def reverse_route(route: Route, network: NetworkModel) -> Route:
    """The opposite direction of a single-leaf route (e.g. CONNECT after SETUP)."""
    if len(route.leaves) != 1:
        raise InvalidSpecError("only unicast routes can be reversed")
    leaf = route.leaves[0]
    inputs = [route.ingress]
    for s, p in leaf[:-1]:
        inputs.append(network.downstream(s, p))
    hops = tuple(reversed(inputs))
    return Route(leaf[-1], (hops,))


def _frame_times(spec: TrafficSpec, horizon: int | None) -> np.ndarray:
    """Nominal start tick of each frame (or cell, for CBR) of one source."""
    unit_bits = CELL_PAYLOAD_OCTETS * 8 if spec.is_cbr else 8 * spec.payload_octets
    interval_ps = round_half_up(unit_bits * 10**12, spec.effective_bps)
    if spec.burst_frames is not None:
        count = spec.burst_frames
    elif spec.frame_count is not None:
        count = spec.frame_count
    else:
        count = -(-spec.duration * PS_PER_TICK // interval_ps)
    if horizon is not None:
        room = horizon - spec.start_tick
        count = min(count, max(0, -(-room * PS_PER_TICK // interval_ps)))
    k = np.arange(count, dtype=np.int64)
    return spec.start_tick + (2 * k * interval_ps + PS_PER_TICK) // (2 * PS_PER_TICK)


def _check_load(network: NetworkModel, routes: Mapping[int, Route], traffic: Sequence[TrafficSpec]) -> None:
    demand: dict[tuple[int, int], float] = {}
    for spec in traffic:
        ing = routes[spec.vc_id].ingress
        if spec.is_cbr:
            cells = spec.effective_bps / (CELL_PAYLOAD_OCTETS * 8)
        else:
            cells = spec.effective_bps / (8 * spec.payload_octets) * cells_per_frame(spec.payload_octets)
        demand[ing] = demand.get(ing, 0.0) + cells
    for ing, cells in demand.items():
        limit = network.rate(*ing).cells_per_second
        if cells > limit * (1 + 1e-9):
            raise InvalidSpecError(
                f"ingress {ing} offered {cells:.6g} cells/s, link carries {limit:.6g}"
            )


def simulate(
    network: NetworkModel,
    config: ConnectionConfig | None,
    traffic: Sequence[TrafficSpec],
    horizon: int | None = None,
    *,
    routes: Mapping[int, Route] | None = None,
    backend: str | None = None,
    switch: int = 0,
) -> Trace:
    """Run one deterministic simulation and return the cell trace.

    Frames are generated up to ``horizon`` (nominal start ticks); the network is
    then run until every cell has been delivered or dropped.
    """
    if routes is None:
        if config is None:
            raise InvalidSpecError("give a connection config or explicit routes")
        routes = routes_from_config(config, network, switch)
    for vid, r in routes.items():
        try:
            r.validate(network)
        except InvalidSpecError as exc:
            raise InvalidSpecError(f"VC {vid}: {exc}") from None
    for spec in traffic:
        if spec.vc_id not in routes:
            raise InvalidSpecError(f"traffic for VC {spec.vc_id} has no route")
    if len({s.vc_id for s in traffic}) != len(traffic):
        raise InvalidSpecError("more than one source per VC")
    _check_load(network, routes, traffic)

    offsets = network.port_offsets
    cols = {k: [] for k in ("vc", "frame", "seq", "first", "last", "ready", "cls", "ingress")}
    frame_payload, frame_class = {}, {}
    next_frame = 0
    for spec in traffic:
        route = routes[spec.vc_id]
        ct_in = network.rate(*route.ingress).cell_time
        g_in = offsets[route.ingress[0]] + route.ingress[1]
        starts = _frame_times(spec, horizon)
        if spec.is_cbr:
            n = starts.size
            cols["frame"].append(np.full(n, -1, dtype=np.int64))
            cols["seq"].append(np.arange(n, dtype=np.int64))
            cols["first"].append(np.zeros(n, dtype=bool))
            cols["last"].append(np.zeros(n, dtype=bool))
            cols["ready"].append(starts)
        else:
            nc = cells_per_frame(spec.payload_octets)
            f = starts.size
            fids = np.arange(next_frame, next_frame + f, dtype=np.int64)
            for fid in fids.tolist():
                frame_payload[fid] = spec.payload_octets
                frame_class[fid] = spec.service_class
            next_frame += f
            seq = np.tile(np.arange(nc, dtype=np.int64), f)
            cols["frame"].append(np.repeat(fids, nc))
            cols["seq"].append(seq)
            cols["first"].append(seq == 0)
            cols["last"].append(seq == nc - 1)
            cols["ready"].append(np.repeat(starts, nc) + seq * (1 + spec.idle_gap_cells) * ct_in)
            n = f * nc
        cols["vc"].append(np.full(n, spec.vc_id, dtype=np.int64))
        cols["cls"].append(np.full(n, _CLASS_CODE[spec.service_class], dtype=np.int8))
        cols["ingress"].append(np.full(n, g_in, dtype=np.int64))

    if not traffic or sum(a.size for a in cols["vc"]) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return Trace(network, *([empty] * 3), empty.astype(bool), empty.astype(bool),
                     *([empty] * 7), frame_payload, frame_class, kernel.BACKEND)

    vc = np.concatenate(cols["vc"])
    frame = np.concatenate(cols["frame"])
    seq = np.concatenate(cols["seq"])
    first = np.concatenate(cols["first"])
    last = np.concatenate(cols["last"])
    ready = np.concatenate(cols["ready"])
    cls = np.concatenate(cols["cls"])
    ingress = np.concatenate(cols["ingress"])

    # Input link multiplexing: FIFO by ready time, ties by (vc, frame, seq).
    order = np.lexsort((seq, frame, vc, ready, ingress))
    tx = np.empty_like(ready)
    ing_sorted = ingress[order]
    bounds = np.flatnonzero(np.diff(ing_sorted)) + 1
    for lo, hi in zip(np.r_[0, bounds], np.r_[bounds, ing_sorted.size]):
        idx = order[lo:hi]
        ct = network.rate(*network.locate(int(ing_sorted[lo]))).cell_time
        steps = np.arange(hi - lo, dtype=np.int64) * ct
        tx[idx] = steps + np.maximum.accumulate(ready[idx] - steps)
    ct_of = np.array([network.rate(*network.locate(g)).cell_time
                      for g in range(network.n_global_ports)], dtype=np.int64)
    entry_first = tx
    entry_last = tx + ct_of[ingress]

    # Expand multicast leaves into copies and lay out their paths.
    hops: list[int] = []
    vids = np.array(sorted(routes), dtype=np.int64)
    path_rows: list[tuple[int, int, int]] = []
    leaf_base = np.zeros(vids.size + 1, dtype=np.int64)
    for i, vid in enumerate(vids.tolist()):
        for leaf_hops in routes[vid].leaves:
            path_rows.append((len(hops), len(leaf_hops), offsets[leaf_hops[-1][0]] + leaf_hops[-1][1]))
            hops.extend(offsets[s] + p for s, p in leaf_hops)
        leaf_base[i + 1] = len(path_rows)
    vi = np.searchsorted(vids, vc)
    reps = leaf_base[vi + 1] - leaf_base[vi]
    cell_idx = np.repeat(np.arange(vc.size), reps)
    starts = np.cumsum(reps) - reps
    leaf = np.arange(cell_idx.size, dtype=np.int64) - np.repeat(starts, reps)
    c_vc = vc[cell_idx]
    pinfo = np.asarray(path_rows, dtype=np.int64).reshape(-1, 3)[leaf_base[vi[cell_idx]] + leaf]
    rank = np.empty(cell_idx.size, dtype=np.int64)
    rank[np.lexsort((leaf, seq[cell_idx], frame[cell_idx], c_vc))] = np.arange(cell_idx.size)

    lat = np.array([sw.cell_latency for sw in network.switches], dtype=np.int64)
    sw_of = np.array([network.locate(g)[0] for g in range(network.n_global_ports)], dtype=np.int64)
    port_next_lat = np.zeros(network.n_global_ports, dtype=np.int64)
    port_next_prop = np.zeros(network.n_global_ports, dtype=np.int64)
    port_cap = np.zeros(network.n_global_ports, dtype=np.int64)
    for g in range(network.n_global_ports):
        s, p = network.locate(g)
        nxt = network.downstream(s, p)
        if nxt is not MONITOR:
            port_next_lat[g] = lat[nxt[0]]
            if nxt != (s, p):
                port_next_prop[g] = network.propagation
        b = network.switches[s].buffer_cells
        port_cap[g] = kernel.UNBOUNDED_BUFFER if b is None else b

    eligible = entry_last[cell_idx] + lat[sw_of[ingress[cell_idx]]]
    run = kernel.get_run_events(backend)
    exit_last, drop_port = run(
        rank, np.ascontiguousarray(cls[cell_idx]),
        np.ascontiguousarray(pinfo[:, 0]), np.ascontiguousarray(pinfo[:, 1]),
        np.ascontiguousarray(eligible), np.asarray(hops, dtype=np.int64),
        ct_of, port_next_lat, port_next_prop, port_cap,
    )
    order = np.argsort(rank, kind="stable")
    ci = cell_idx[order]
    name = "python" if run is kernel.python_run_events else "cython"
    return Trace(
        network,
        vc_id=c_vc[order], frame_id=frame[ci], seq=seq[ci], is_first=first[ci], is_last=last[ci],
        leaf=leaf[order], entry_first=entry_first[ci], entry_last=entry_last[ci],
        exit_last=exit_last[order], in_port=ingress[ci], out_port=pinfo[order, 2],
        drop_port=drop_port[order], frame_payload=frame_payload, frame_class=frame_class,
        backend=name,
    )


def monitor_ctd(trace: Trace, index: int, monitor: MonitorModel) -> int | None:
    """Cell transfer delay as the monitor reports it, bias included."""
    ex = int(trace.exit_last[index])
    if ex == LOST:
        return None
    return ex - int(trace.entry_first[index]) + monitor.overhead + monitor.propagation


def calibrate_monitor_overhead(monitor: MonitorModel, rate: LinkRate = LinkRate(155_520_000)) -> int:
    """Closed-loop calibration: measured CTD minus (cell transmit time + propagation)."""
    measured = rate.cell_time + monitor.propagation + monitor.overhead
    return measured - (rate.cell_time + monitor.propagation)


def run_signaling_exchange(
    network: NetworkModel,
    path: Route,
    setup_spec: TrafficSpec,
    connect_spec: TrafficSpec,
    destination_hold: int = 0,
    backend: str | None = None,
) -> tuple[Trace, Trace]:
    """Carry a SETUP message along ``path`` and the CONNECT back along its reverse.

    The CONNECT is emitted ``destination_hold`` ticks after the SETUP's last
    bit leaves the network.  Each trace is rebased to its own message's
    emission tick, so the hold never appears in either trace.
    """
    if destination_hold < 0:
        raise InvalidSpecError("destination_hold must be >= 0")
    for spec in (setup_spec, connect_spec):
        if spec.service_class is not ServiceClass.SIGNALING:
            raise InvalidSpecError("signaling messages must use the SIGNALING class")
    setup_spec = replace(setup_spec, frame_count=1, burst_frames=None, duration=None)
    setup = simulate(network, None, [setup_spec], routes={setup_spec.vc_id: path}, backend=backend)
    if not setup.delivered.all():
        raise InvalidSpecError("SETUP message lost on an idle network")
    delivered_at = int(setup.exit_last.max())
    start = delivered_at + destination_hold
    connect_spec = replace(connect_spec, frame_count=1, burst_frames=None, duration=None,
                           start_tick=start)
    back = reverse_route(path, network)
    connect = simulate(network, None, [connect_spec], routes={connect_spec.vc_id: back}, backend=backend)
    return setup.rebased(setup_spec.start_tick), connect.rebased(start)
