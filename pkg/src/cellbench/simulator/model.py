"""Static description of the system under test and of the offered traffic."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

from ..aal import LinkRate, ServiceClass
from ..topology import ConnectionConfig, default_module_map

__all__ = [
    "InvalidSpecError",
    "SwitchModel",
    "NetworkModel",
    "Route",
    "TrafficSpec",
    "MonitorModel",
    "MONITOR",
]

MONITOR = None  # wiring target for ports attached to the measurement equipment


class InvalidSpecError(ValueError):
    """The requested simulation cannot be run as specified."""


@dataclass(frozen=True)
class SwitchModel:
    """Output-queued store-and-forward cell switch.

    ``buffer_cells`` is the waiting room of each output port, not counting the
    cell being transmitted; None means unbounded.
    """

    n_ports: int
    link_rates: tuple[LinkRate, ...]
    module_of: tuple[int, ...]
    fabric_of: tuple[int, ...] = ()
    cell_latency: int = 0
    buffer_cells: int | None = 256
    loopback: frozenset[int] = frozenset()

    def __post_init__(self):
        if self.n_ports < 1:
            raise InvalidSpecError("a switch needs at least one port")
        if len(self.link_rates) != self.n_ports:
            raise InvalidSpecError(f"{len(self.link_rates)} link rates for {self.n_ports} ports")
        if len(self.module_of) != self.n_ports:
            raise InvalidSpecError(f"module map covers {len(self.module_of)} of {self.n_ports} ports")
        n_modules = max(self.module_of) + 1 if self.module_of else 0
        if self.fabric_of and len(self.fabric_of) < n_modules:
            raise InvalidSpecError("fabric map does not cover every network module")
        if self.cell_latency < 0:
            raise InvalidSpecError("cell_latency must be >= 0")
        if self.buffer_cells is not None and self.buffer_cells < 1:
            raise InvalidSpecError("buffer_cells must be >= 1")
        if any(not 0 <= p < self.n_ports for p in self.loopback):
            raise InvalidSpecError("loopback port out of range")

    @classmethod
    def uniform(
        cls,
        n_ports: int,
        bits_per_second: int,
        cell_latency: int = 0,
        buffer_cells: int | None = 256,
        n_modules: int = 2,
        loopback: Sequence[int] = (),
    ) -> "SwitchModel":
        return cls(
            n_ports=n_ports,
            link_rates=tuple(LinkRate(bits_per_second) for _ in range(n_ports)),
            module_of=default_module_map(n_ports, n_modules),
            cell_latency=cell_latency,
            buffer_cells=buffer_cells,
            loopback=frozenset(loopback),
        )

    def with_loopback(self, ports) -> "SwitchModel":
        return SwitchModel(self.n_ports, self.link_rates, self.module_of, self.fabric_of,
                           self.cell_latency, self.buffer_cells, frozenset(ports))

    def fabric(self, port: int) -> int:
        mod = self.module_of[port]
        return self.fabric_of[mod] if self.fabric_of else 0


@dataclass(frozen=True)
class NetworkModel:
    """Switches plus the links between them.

    Each link joins ``(switch_a, port_a)`` and ``(switch_b, port_b)`` in both
    directions; ``propagation`` is the one-way delay in ticks.  Ports that are
    neither looped back nor linked are attached to the monitor.
    """

    switches: tuple[SwitchModel, ...]
    links: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = ()
    propagation: int = 0

    def __post_init__(self):
        if not self.switches:
            raise InvalidSpecError("network has no switches")
        seen = set()
        for a, b in self.links:
            for s, p in (a, b):
                if not 0 <= s < len(self.switches) or not 0 <= p < self.switches[s].n_ports:
                    raise InvalidSpecError(f"link endpoint {(s, p)} does not exist")
                if (s, p) in seen or p in self.switches[s].loopback:
                    raise InvalidSpecError(f"port {(s, p)} is wired twice")
                seen.add((s, p))
            if self.switches[a[0]].link_rates[a[1]] != self.switches[b[0]].link_rates[b[1]]:
                raise InvalidSpecError(f"link {a}-{b} joins ports of different rates")
        if self.propagation < 0:
            raise InvalidSpecError("propagation must be >= 0")

    @classmethod
    def single(cls, switch: SwitchModel) -> "NetworkModel":
        return cls((switch,))

    @classmethod
    def chain(cls, n_switches: int, bits_per_second: int, cell_latency: int = 0,
              buffer_cells: int | None = 256, propagation: int = 0) -> "NetworkModel":
        """Switches in a line; port 0 faces upstream, port 1 downstream."""
        sw = SwitchModel.uniform(2, bits_per_second, cell_latency, buffer_cells, n_modules=1)
        links = tuple(((i, 1), (i + 1, 0)) for i in range(n_switches - 1))
        return cls(tuple(sw for _ in range(n_switches)), links, propagation)

    @property
    def port_offsets(self) -> list[int]:
        out, acc = [], 0
        for sw in self.switches:
            out.append(acc)
            acc += sw.n_ports
        return out

    @property
    def n_global_ports(self) -> int:
        return sum(sw.n_ports for sw in self.switches)

    def gport(self, switch: int, port: int) -> int:
        return self.port_offsets[switch] + port

    def locate(self, gport: int) -> tuple[int, int]:
        for s, off in enumerate(self.port_offsets):
            if gport < off + self.switches[s].n_ports:
                return s, gport - off
        raise IndexError(gport)

    def rate(self, switch: int, port: int) -> LinkRate:
        return self.switches[switch].link_rates[port]

    def downstream(self, switch: int, port: int) -> tuple[int, int] | None:
        """Where cells leaving this output port arrive next (None: the monitor)."""
        if port in self.switches[switch].loopback:
            return switch, port
        for a, b in self.links:
            if a == (switch, port):
                return b
            if b == (switch, port):
                return a
        return MONITOR


@dataclass(frozen=True)
class Route:
    """Ingress port and, per multicast leaf, the output ports visited in order."""

    ingress: tuple[int, int]
    leaves: tuple[tuple[tuple[int, int], ...], ...]

    def validate(self, network: NetworkModel) -> None:
        s, p = self.ingress
        if not 0 <= s < len(network.switches) or not 0 <= p < network.switches[s].n_ports:
            raise InvalidSpecError(f"ingress {self.ingress} does not exist")
        if not self.leaves:
            raise InvalidSpecError("route has no leaves")
        for leaf in self.leaves:
            if not leaf:
                raise InvalidSpecError("route leaf visits no output port")
            here = s
            for i, (hs, hp) in enumerate(leaf):
                if hs != here:
                    raise InvalidSpecError(f"hop {(hs, hp)} is not on switch {here}")
                if not 0 <= hp < network.switches[hs].n_ports:
                    raise InvalidSpecError(f"port {(hs, hp)} does not exist")
                if i < len(leaf) - 1:
                    nxt = network.downstream(hs, hp)
                    if nxt is MONITOR:
                        raise InvalidSpecError(f"hop {(hs, hp)} leaves the network mid-route")
                    here = nxt[0]


@dataclass(frozen=True)
class TrafficSpec:
    """One source.

    UBR and SIGNALING sources send equally spaced frames of ``payload_octets``
    at ``effective_bps`` of AAL payload.  CBR sources send a contiguous cell
    stream; their ``effective_bps`` counts the 48 payload octets of each cell
    and ``frame_count`` (if given) is a cell count.  ``burst_frames`` sends that
    many frames back to back at ``effective_bps``.  ``idle_gap_cells`` inserts
    idle cell slots between the cells of one frame.
    """

    vc_id: int
    service_class: ServiceClass = ServiceClass.UBR
    payload_octets: int = 64
    effective_bps: float = 0.0
    start_tick: int = 0
    frame_count: int | None = None
    duration: int | None = None
    burst_frames: int | None = None
    idle_gap_cells: int = 0

    def __post_init__(self):
        if self.effective_bps <= 0:
            raise InvalidSpecError(f"VC {self.vc_id}: effective_bps must be > 0")
        if self.service_class is not ServiceClass.CBR and self.payload_octets < 1:
            raise InvalidSpecError(f"VC {self.vc_id}: payload_octets must be >= 1")
        if self.start_tick < 0 or self.idle_gap_cells < 0:
            raise InvalidSpecError(f"VC {self.vc_id}: negative start or idle gap")
        if self.frame_count is None and self.duration is None and self.burst_frames is None:
            raise InvalidSpecError(f"VC {self.vc_id}: give frame_count, duration or burst_frames")

    @property
    def is_cbr(self) -> bool:
        return self.service_class is ServiceClass.CBR


@dataclass(frozen=True)
class MonitorModel:
    """Measurement equipment bias on cell transfer delay readings."""

    overhead: int = 0
    propagation: int = 0

    def __post_init__(self):
        if self.overhead < 0 or self.propagation < 0:
            raise InvalidSpecError("monitor overhead and propagation must be >= 0")
