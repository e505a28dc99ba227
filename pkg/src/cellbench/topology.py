"""Connection configurations, loopback test layouts and max-min fair shares."""

from __future__ import annotations

import enum
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction

__all__ = [
    "ConfigKind",
    "Role",
    "VC",
    "ConnectionConfig",
    "LoadBudget",
    "build_straight",
    "build_full_cross",
    "build_partial_cross",
    "build_k_to_1",
    "build_multicast",
    "build_config",
    "build_loopback_throughput",
    "build_latency_background",
    "max_min_allocation",
    "max_background_lossless_rate",
    "default_module_map",
]


class ConfigKind(enum.Enum):
    STRAIGHT = "straight"
    FULL_CROSS = "full_cross"
    PARTIAL_CROSS = "partial_cross"
    K_TO_1 = "k_to_1"
    MULTICAST = "multicast"


class Role(enum.Enum):
    FOREGROUND = "foreground"
    BACKGROUND = "background"


@dataclass(frozen=True)
class VC:
    vc_id: int
    input_port: int
    output_ports: tuple[int, ...]
    role: Role = Role.FOREGROUND
    switched: bool = False  # SVC if True, PVC otherwise
    path_connection: bool = False  # VPC if True, VCC otherwise

    def __post_init__(self):
        if not self.output_ports:
            raise ValueError(f"VC {self.vc_id} has no output port")
        if self.input_port in self.output_ports:
            raise ValueError(f"VC {self.vc_id} loops back onto its input port {self.input_port}")

    @property
    def is_multicast(self) -> bool:
        return len(self.output_ports) > 1


@dataclass(frozen=True)
class ConnectionConfig:
    kind: ConfigKind
    vcs: tuple[VC, ...]
    n_ports: int
    m: int | None = None
    k: int | None = None
    # Loopback layouts: each chain lists vc_ids in the order one frame traverses them.
    chains: tuple[tuple[int, ...], ...] = ()
    loopback: frozenset[int] = frozenset()
    monitor_ports: frozenset[int] = frozenset()

    def __post_init__(self):
        ids = [vc.vc_id for vc in self.vcs]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate vc_id in configuration")
        for vc in self.vcs:
            for p in (vc.input_port, *vc.output_ports):
                if not 0 <= p < self.n_ports:
                    raise ValueError(f"VC {vc.vc_id} references port {p} outside 0..{self.n_ports - 1}")
        if self.kind is not ConfigKind.MULTICAST and any(vc.is_multicast for vc in self.vcs):
            raise ValueError(f"{self.kind.value} configuration cannot contain multicast VCs")

    def vc(self, vc_id: int) -> VC:
        for vc in self.vcs:
            if vc.vc_id == vc_id:
                return vc
        raise KeyError(vc_id)

    @property
    def label(self) -> str:
        if self.kind is ConfigKind.PARTIAL_CROSS:
            return f"{self.n_ports}-to-{self.m} partial cross"
        if self.kind is ConfigKind.K_TO_1:
            return f"{self.k}-to-1"
        if self.kind is ConfigKind.MULTICAST:
            return f"1-to-{self.n_ports - 1} multicast"
        if self.kind is ConfigKind.FULL_CROSS:
            return f"{self.n_ports}-to-{self.n_ports - 1} full cross"
        return f"{self.n_ports}-to-{self.n_ports} straight"

    def ports_in_use(self) -> set[int]:
        used = set()
        for vc in self.vcs:
            used.add(vc.input_port)
            used.update(vc.output_ports)
        return used


@dataclass(frozen=True)
class LoadBudget:
    """Foreground/background load limits, in raw line bits per second."""

    ffl: int
    mbl: int

    def effective(self, payload_octets: int) -> tuple[float, float]:
        from .aal import CELL_BITS, cell_rate_to_effective_rate

        return (
            cell_rate_to_effective_rate(self.ffl / CELL_BITS, payload_octets),
            cell_rate_to_effective_rate(self.mbl / CELL_BITS, payload_octets),
        )


def _check_n(n: int) -> None:
    if n < 2:
        raise ValueError(f"a configuration needs at least 2 ports, got {n}")


def _rotation_edges(n: int, m: int) -> list[tuple[int, int]]:
    return [(i, (i + j) % n) for i in range(n) for j in range(1, m + 1)]


def _from_edges(kind, edges, n, first_vc_id=0, role=Role.FOREGROUND, **kw) -> ConnectionConfig:
    vcs = tuple(
        VC(first_vc_id + i, src, (dst,), role) for i, (src, dst) in enumerate(edges)
    )
    return ConnectionConfig(kind, vcs, n, **kw)


def build_straight(n: int, first_vc_id: int = 0, role: Role = Role.FOREGROUND) -> ConnectionConfig:
    _check_n(n)
    return _from_edges(ConfigKind.STRAIGHT, _rotation_edges(n, 1), n, first_vc_id, role, m=1)


def build_full_cross(n: int, first_vc_id: int = 0, role: Role = Role.FOREGROUND) -> ConnectionConfig:
    _check_n(n)
    return _from_edges(ConfigKind.FULL_CROSS, _rotation_edges(n, n - 1), n, first_vc_id, role, m=n - 1)


def build_partial_cross(
    n: int, m: int, first_vc_id: int = 0, role: Role = Role.FOREGROUND
) -> ConnectionConfig:
    _check_n(n)
    if not 1 <= m <= n - 1:
        raise ValueError(f"partial cross needs 1 <= m <= n-1, got m={m}, n={n}")
    return _from_edges(ConfigKind.PARTIAL_CROSS, _rotation_edges(n, m), n, first_vc_id, role, m=m)


def build_k_to_1(
    k: int,
    out_port: int,
    n: int,
    inputs: Sequence[int] | None = None,
    first_vc_id: int = 0,
    role: Role = Role.FOREGROUND,
) -> ConnectionConfig:
    _check_n(n)
    if not 0 <= out_port < n:
        raise ValueError(f"out_port {out_port} outside 0..{n - 1}")
    if not 2 <= k <= n - 1:
        raise ValueError(f"k-to-1 needs 2 <= k <= n-1, got k={k}, n={n}")
    if inputs is None:
        inputs = [(out_port + j) % n for j in range(1, k + 1)]
    inputs = list(inputs)
    if len(inputs) != k or len(set(inputs)) != k:
        raise ValueError(f"k-to-1 needs {k} distinct input ports, got {inputs}")
    if out_port in inputs:
        raise ValueError(f"out_port {out_port} is also an input port")
    edges = [(i, out_port) for i in inputs]
    return _from_edges(ConfigKind.K_TO_1, edges, n, first_vc_id, role, k=k)


def build_multicast(
    n: int, root: int = 0, first_vc_id: int = 0, role: Role = Role.FOREGROUND
) -> ConnectionConfig:
    _check_n(n)
    leaves = tuple(p for p in range(n) if p != root)
    return ConnectionConfig(ConfigKind.MULTICAST, (VC(first_vc_id, root, leaves, role),), n)


def build_config(kind: ConfigKind | str, n: int, m: int | None = None, k: int | None = None,
                 out_port: int | None = None, **kw) -> ConnectionConfig:
    kind = ConfigKind(kind)
    if kind is ConfigKind.STRAIGHT:
        return build_straight(n, **kw)
    if kind is ConfigKind.FULL_CROSS:
        return build_full_cross(n, **kw)
    if kind is ConfigKind.PARTIAL_CROSS:
        if m is None:
            raise ValueError("partial cross needs m")
        return build_partial_cross(n, m, **kw)
    if kind is ConfigKind.K_TO_1:
        if k is None:
            raise ValueError("k-to-1 needs k")
        return build_k_to_1(k, 0 if out_port is None else out_port, n, **kw)
    return build_multicast(n, **kw)


def default_module_map(n_ports: int, n_modules: int = 2) -> tuple[int, ...]:
    """Contiguous equal-size port groups, e.g. P0-P3 / P4-P7 for 8 ports."""
    n_modules = max(1, min(n_modules, n_ports))
    size = -(-n_ports // n_modules)
    return tuple(p // size for p in range(n_ports))


def _cross_module_edges(nodes: list[int], m: int, module_of) -> list[tuple[int, int]] | None:
    """Circulant edge set that prefers outputs in another network module.

    Returns None when the preference cannot give every node in- and out-degree m.
    """
    by_module: dict[int, list[int]] = {}
    for v in nodes:
        by_module.setdefault(module_of(v), []).append(v)
    edges = []
    for v in nodes:
        mod = module_of(v)
        rank = by_module[mod].index(v)
        others = [u for u in nodes if module_of(u) != mod]
        same = [u for u in by_module[mod] if u != v]
        if others:
            s = rank % len(others)
            others = others[s:] + others[:s]
        if same:
            s = same.index(next((u for u in same if nodes.index(u) > nodes.index(v)), same[0]))
            same = same[s:] + same[:s]
        for u in (others + same)[:m]:
            edges.append((v, u))
    indeg = {v: 0 for v in nodes}
    for _, u in edges:
        indeg[u] += 1
    if any(d != m for d in indeg.values()):
        return None
    return edges


def _euler_chains(edges: list[tuple[int, int]], start: int, module_of) -> list[list[tuple[int, int]]]:
    """Split an Eulerian circuit from ``start`` into closed trails that touch ``start`` only at their ends."""
    adj: dict[int, list[tuple[int, int]]] = {}
    for e in edges:
        adj.setdefault(e[0], []).append(e)
    # Hops that leave the current network module are taken first.
    for v, out in adj.items():
        out.sort(key=lambda e: module_of(e[1]) == module_of(e[0]))
        out.reverse()  # pop() takes from the end
    stack: list[tuple[int, tuple[int, int] | None]] = [(start, None)]
    circuit: list[tuple[int, int]] = []
    while stack:
        v, via = stack[-1]
        if adj.get(v):
            e = adj[v].pop()
            stack.append((e[1], e))
        else:
            stack.pop()
            if via is not None:
                circuit.append(via)
    circuit.reverse()
    if len(circuit) != len(edges):
        raise ValueError("edge set is not Eulerian from the monitor port")
    chains, cur = [], []
    for e in circuit:
        cur.append(e)
        if e[1] == start:
            chains.append(cur)
            cur = []
    if cur:
        raise ValueError("chain does not return to the monitor port")
    return chains


def build_loopback_throughput(
    n_ports: int,
    m: int,
    module_map: Sequence[int] | None = None,
    monitor_port: int = 0,
    first_vc_id: int = 0,
) -> tuple[ConnectionConfig, frozenset[int]]:
    """Emulate an n-to-m partial cross with one generator/analyzer pair.

    Every non-monitor port is looped back.  The n*m VCs are arranged into m
    chains; each chain starts at the monitor input and ends at the monitor
    output, visiting the switch once per VC.
    """
    _check_n(n_ports)
    if not 1 <= m <= n_ports - 1:
        raise ValueError(f"partial cross needs 1 <= m <= n-1, got m={m}, n={n_ports}")
    if module_map is None:
        module_map = default_module_map(n_ports)
    if len(module_map) != n_ports:
        raise ValueError(f"module map has {len(module_map)} entries for {n_ports} ports")
    if not 0 <= monitor_port < n_ports:
        raise ValueError(f"monitor port {monitor_port} outside 0..{n_ports - 1}")
    nodes = list(range(n_ports))
    module_of = module_map.__getitem__
    edges = _cross_module_edges(nodes, m, module_of)
    try:
        chains = _euler_chains(edges, monitor_port, module_of) if edges else None
    except ValueError:  # balanced but split into disjoint cycles
        chains = None
    if chains is None:
        chains = _euler_chains(_rotation_edges(n_ports, m), monitor_port, module_of)
    vcs, vc_chains = [], []
    vid = first_vc_id
    for chain in chains:
        ids = []
        for src, dst in chain:
            vcs.append(VC(vid, src, (dst,)))
            ids.append(vid)
            vid += 1
        vc_chains.append(tuple(ids))
    loop = frozenset(p for p in nodes if p != monitor_port)
    kind = ConfigKind.STRAIGHT if m == 1 else (
        ConfigKind.FULL_CROSS if m == n_ports - 1 else ConfigKind.PARTIAL_CROSS)
    cfg = ConnectionConfig(kind, tuple(vcs), n_ports, m=m, chains=tuple(vc_chains),
                           loopback=loop, monitor_ports=frozenset({monitor_port}))
    return cfg, loop


def build_latency_background(
    w: int,
    kind: ConfigKind | str,
    m: int | None = None,
    link_rates: Sequence[int] | None = None,
    module_map: Sequence[int] | None = None,
    fg_input: int = 0,
    fg_output: int | None = None,
    first_vc_id: int = 0,
) -> tuple[VC, ConnectionConfig, LoadBudget]:
    """Foreground VC plus loopback background traffic over ``n = w - 1`` effective ports.

    The foreground enters at ``fg_input`` and leaves at ``fg_output``.  The
    background enters the switch on the input side of ``fg_output`` and leaves
    on the output side of ``fg_input``; the remaining ports are looped back.
    The foreground VC gets ``first_vc_id``; background VCs follow.
    """
    kind = ConfigKind(kind)
    if w < 3:
        raise ValueError(f"latency layout needs w >= 3 ports, got {w}")
    if kind is ConfigKind.K_TO_1:
        raise ValueError("k-to-1 is not a background configuration")
    n = w - 1
    if module_map is None:
        module_map = default_module_map(w)
    if len(module_map) != w:
        raise ValueError(f"module map has {len(module_map)} entries for {w} ports")
    if link_rates is None:
        link_rates = [1] * w
    if len(link_rates) != w:
        raise ValueError(f"{len(link_rates)} link rates given for {w} ports")
    if fg_output is None:
        fg_output = next((p for p in range(w) if module_map[p] != module_map[fg_input] and p != fg_input),
                         (fg_input + 1) % w)
    if fg_input == fg_output or not (0 <= fg_input < w and 0 <= fg_output < w):
        raise ValueError("foreground input and output ports must be distinct ports of the switch")

    # Loopback ports alternate network modules so successive background hops cross modules.
    rest = [p for p in range(w) if p not in (fg_input, fg_output)]
    groups: dict[int, list[int]] = {}
    for p in rest:
        groups.setdefault(module_map[p], []).append(p)
    order = sorted(groups, key=lambda g: (g == module_map[fg_input], g))
    loop_ports = []
    while any(groups.values()):
        for g in order:
            if groups[g]:
                loop_ports.append(groups[g].pop(0))
    X = -1  # virtual port: input side of fg_output, output side of fg_input
    virtual = [X] + loop_ports

    def phys_in(v):
        return fg_output if v == X else v

    def phys_out(v):
        return fg_input if v == X else v

    fg = VC(first_vc_id, fg_input, (fg_output,))
    vid = first_vc_id + 1
    if kind is ConfigKind.MULTICAST:
        bg = VC(vid, phys_in(X), tuple(phys_out(v) for v in virtual[1:]), Role.BACKGROUND)
        vcs, chains = (bg,), ((vid,),)
    else:
        if kind is ConfigKind.STRAIGHT:
            mm = 1
        elif kind is ConfigKind.FULL_CROSS:
            mm = n - 1
        else:
            if m is None or not 1 <= m <= n - 1:
                raise ValueError(f"partial cross background needs 1 <= m <= {n - 1}, got {m}")
            mm = m
        edges = [(virtual[i], virtual[(i + j) % n]) for i in range(n) for j in range(1, mm + 1)]
        vmod = {v: module_map[phys_out(v)] for v in virtual}
        chain_edges = _euler_chains(edges, X, vmod.__getitem__)
        vcs, chains = [], []
        for chain in chain_edges:
            ids = []
            for a, b in chain:
                vcs.append(VC(vid, phys_in(a), (phys_out(b),), Role.BACKGROUND))
                ids.append(vid)
                vid += 1
            chains.append(tuple(ids))
        vcs, chains = tuple(vcs), tuple(chains)

    for vc in vcs:
        if vc.input_port == fg_input or fg_output in vc.output_ports:
            raise AssertionError("background VC shares a foreground link direction")
    cfg = ConnectionConfig(
        kind, vcs, w, m=None if kind is ConfigKind.MULTICAST else mm, chains=chains,
        loopback=frozenset(loop_ports), monitor_ports=frozenset({fg_input, fg_output}),
    )
    budget = LoadBudget(
        ffl=min(link_rates[fg_input], link_rates[fg_output]),
        mbl=sum(r for p, r in enumerate(link_rates) if p != fg_input),
    )
    return fg, cfg, budget


def max_background_lossless_rate(link_rates: Sequence[float], n: int) -> float:
    """Largest background input rate a loopback layout can carry without loss."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    rates = list(link_rates)
    if not rates:
        raise ValueError("no link rates given")
    if len(set(rates)) == 1:
        return (len(rates) - 1) * rates[0] if len(rates) > 1 else rates[0]
    return (n - 1) * min(rates)


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def max_min_allocation(
    demands: Sequence[float | None],
    link_capacities: Sequence[float],
    vc_routes: Sequence[Sequence[int]],
    policy: str = "max-min",
) -> list[Fraction]:
    """Equal-weight max-min fair shares by progressive filling.

    ``demands[i]`` may be None (or inf) for an unlimited source.  Arithmetic is
    exact: float inputs are converted to the rationals they represent.
    """
    if policy != "max-min":
        raise ValueError(f"unsupported allocation policy {policy!r}")
    if len(demands) != len(vc_routes):
        raise ValueError("one route per demand is required")
    caps = []
    for c in link_capacities:
        if not c > 0:
            raise ValueError(f"link capacities must be > 0, got {c}")
        caps.append(_frac(c))
    dem: list[Fraction | None] = []
    for d in demands:
        if d is None or d == float("inf"):
            dem.append(None)
        elif d < 0:
            raise ValueError(f"negative demand {d}")
        else:
            dem.append(_frac(d))
    routes = []
    for i, r in enumerate(vc_routes):
        r = sorted(set(r))
        if not r:
            raise ValueError(f"VC {i} is routed over zero links")
        if any(not 0 <= l < len(caps) for l in r):
            raise ValueError(f"VC {i} uses an unknown link")
        routes.append(r)

    n = len(dem)
    share = [Fraction(0)] * n
    active = {i for i in range(n) if dem[i] is None or dem[i] > 0}
    remaining = list(caps)
    while active:
        users = [0] * len(caps)
        for i in active:
            for l in routes[i]:
                users[l] += 1
        step = min(remaining[l] / users[l] for l in range(len(caps)) if users[l])
        for i in active:
            if dem[i] is not None:
                step = min(step, dem[i] - share[i])
        for i in active:
            share[i] += step
            for l in routes[i]:
                remaining[l] -= step
        saturated = {l for l in range(len(caps)) if users[l] and remaining[l] == 0}
        active = {
            i for i in active
            if not (dem[i] is not None and share[i] >= dem[i])
            and not saturated.intersection(routes[i])
        }
    return share
