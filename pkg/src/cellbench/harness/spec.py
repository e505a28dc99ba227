"""Test-spec file format.

A spec is line oriented.  Each line is ``key = value``; ``#`` starts a comment.
Top-level keys come first, followed by a ``[system]`` block describing the
switch under test and an optional ``[background]`` block.  List values are
comma separated.  Example::

    seed = 7
    metrics = throughput
    configs = partial_cross
    m = 2

    [system]
    ports = 8
    rate = 155520000

Every key, its default and its meaning is listed in ``TOP_KEYS``,
``SYSTEM_KEYS`` and ``BACKGROUND_KEYS``.  ``expect.<metric> = lo, hi`` lines
declare acceptance bounds on aggregate metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from ..metrics.procedures import default_sweep_grid
from ..topology import ConfigKind

__all__ = [
    "SpecError",
    "SystemSpec",
    "BackgroundSpec",
    "Expectation",
    "TestSpec",
    "SUITES",
    "FORMATS",
    "parse_spec",
    "load_spec",
    "expand_throughput_matrix",
    "with_overrides",
]

SUITES = ("throughput", "latency", "mfbs", "call", "goodput")
FORMATS = ("table", "csv", "jsonl")
DEFAULT_FRAME_SIZES = (64, 1518, 9188, 65536)


class SpecError(ValueError):
    """Spec parse or validation failure, located by line and field."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line, self.field, self.message = line, field, message
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class SystemSpec:
    ports: int
    rates: tuple[int, ...]
    cell_latency: int = 0
    buffer: int | None = 256  # None: unbounded
    modules: int = 2
    propagation: int = 0


@dataclass(frozen=True)
class BackgroundSpec:
    kind: str = "none"  # none | ubr | cbr
    rate: float = 0.0  # effective payload bits/s per background source
    frame_size: int = 64  # UBR only


@dataclass(frozen=True)
class Expectation:
    metric: str
    lo: float
    hi: float


# TestSpec.__test__ keeps pytest from collecting the class.
@dataclass(frozen=True)
class TestSpec:
    __test__ = False

    system: SystemSpec
    seed: int
    metrics: tuple[str, ...] = ()
    configs: tuple[str, ...] = ("straight",)
    m: int = 2
    k: int = 2
    k_output: int = 0
    frame_sizes: tuple[int, ...] = DEFAULT_FRAME_SIZES
    load_ladder: tuple[float, ...] = field(default_factory=default_sweep_grid)
    repetitions: int = 1
    p: int = 1000
    alpha: float = 0.05
    warmup: float = 0.1
    duration: int = 10_000_000
    search: bool = True
    resolution: float | None = None
    refine_steps: int = 6
    latency_start: float = 0.05
    latency_factor: float = 2.0
    latency_warmup_frames: int = 100
    latency_input: int = 0
    latency_output: int | None = None
    mfbs_ceiling: int = 1024
    call_switches: int = 1
    call_message_octets: int = 64
    call_hold: int = 0
    call_hierarchies: int = 0
    goodput_frame_sizes: tuple[int, ...] = (64, 1518, 9188)
    goodput_rates: tuple[int, ...] = (2000, 4000, 6000, 8000, 10000)
    formats: tuple[str, ...] = FORMATS
    output: str = "cellbench-report"
    traces: bool = False
    background: BackgroundSpec = BackgroundSpec()
    expect: tuple[Expectation, ...] = ()

    def canonical_lines(self) -> list[str]:
        """Every resolved setting as ``key = value`` in a fixed order.

        The output path is left out: where a report is written does not
        change what was measured.  Parsing these lines gives back an equal
        spec, apart from ``output``.
        """
        out = []
        for key in TOP_KEYS:
            if key == "output":
                continue
            out.append(f"{key} = {_fmt(getattr(self, key))}")
        for e in self.expect:
            out.append(f"expect.{e.metric} = {_fmt((e.lo, e.hi))}")
        out.append("[system]")
        sysd = self.system
        out.append(f"ports = {sysd.ports}")
        out.append(f"rates = {_fmt(sysd.rates)}")
        for key in ("cell_latency", "buffer", "modules", "propagation"):
            out.append(f"{key} = {_fmt(getattr(sysd, key))}")
        out.append("[background]")
        for key in ("kind", "rate", "frame_size"):
            out.append(f"{key} = {_fmt(getattr(self.background, key))}")
        return out

    def canonical_text(self) -> str:
        return "\n".join(self.canonical_lines()) + "\n"


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


# ---- value parsers -----------------------------------------------------------

def _int(s: str, lo: int | None = None) -> int:
    try:
        v = int(s.replace("_", ""))
    except ValueError:
        raise ValueError(f"expected an integer, got {s!r}") from None
    if lo is not None and v < lo:
        raise ValueError(f"must be >= {lo}, got {v}")
    return v


def _float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise ValueError(f"expected a number, got {s!r}") from None
    if not math.isfinite(v):
        raise ValueError(f"expected a finite number, got {s!r}")
    return v


def _list(s: str) -> list[str]:
    items = [x.strip() for x in s.split(",")]
    return [x for x in items if x]


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("yes", "true", "1", "on"):
        return True
    if low in ("no", "false", "0", "off"):
        return False
    raise ValueError(f"expected yes/no, got {s!r}")


def _pos_ints(s: str) -> tuple[int, ...]:
    vals = tuple(_int(x) for x in _list(s))
    if not vals:
        raise ValueError("empty list")
    for v in vals:
        if v <= 0:
            raise ValueError(f"values must be positive, got {v}")
    return vals


def _choices(allowed):
    def parse(s: str) -> tuple[str, ...]:
        vals = tuple(x.lower() for x in _list(s))
        for v in vals:
            if v not in allowed:
                raise ValueError(f"unknown value {v!r}; choose from {', '.join(allowed)}")
        if len(set(vals)) != len(vals):
            raise ValueError("duplicate entries")
        return vals
    return parse


def _ladder(s: str) -> tuple[float, ...]:
    vals = tuple(_float(x) for x in _list(s))
    if not vals:
        raise ValueError("empty load ladder")
    if any(not 0 < v <= 1 for v in vals):
        raise ValueError("loads must lie in (0, 1]")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError("loads must be strictly increasing")
    return vals


def _opt(parse):
    def p(s: str):
        return None if s.lower() in ("none", "auto", "") else parse(s)
    return p


def _unit_open(s: str) -> float:
    v = _float(s)
    if not 0 < v < 1:
        raise ValueError(f"must lie in (0, 1), got {v}")
    return v


def _fraction(s: str) -> float:
    v = _float(s)
    if not 0 <= v < 1:
        raise ValueError(f"must lie in [0, 1), got {v}")
    return v


def _load(s: str) -> float:
    v = _float(s)
    if not 0 < v <= 1:
        raise ValueError(f"must lie in (0, 1], got {v}")
    return v


def _factor(s: str) -> float:
    v = _float(s)
    if v <= 1:
        raise ValueError(f"must be > 1, got {v}")
    return v


def _positive(s: str) -> float:
    v = _float(s)
    if v <= 0:
        raise ValueError(f"must be > 0, got {v}")
    return v


TOP_KEYS = {
    "seed": lambda s: _int(s),
    "metrics": _choices(SUITES),
    "configs": _choices(tuple(k.value for k in ConfigKind)),
    "m": lambda s: _int(s, 1),
    "k": lambda s: _int(s, 2),
    "k_output": lambda s: _int(s, 0),
    "frame_sizes": _pos_ints,
    "load_ladder": _ladder,
    "repetitions": lambda s: _int(s, 1),
    "p": lambda s: _int(s, 2),
    "alpha": _unit_open,
    "warmup": _fraction,
    "duration": lambda s: _int(s, 1),
    "search": _bool,
    "resolution": _opt(_positive),
    "refine_steps": lambda s: _int(s, 0),
    "latency_start": _load,
    "latency_factor": _factor,
    "latency_warmup_frames": lambda s: _int(s, 0),
    "latency_input": lambda s: _int(s, 0),
    "latency_output": _opt(lambda s: _int(s, 0)),
    "mfbs_ceiling": lambda s: _int(s, 1),
    "call_switches": lambda s: _int(s, 1),
    "call_message_octets": lambda s: _int(s, 1),
    "call_hold": lambda s: _int(s, 0),
    "call_hierarchies": lambda s: _int(s, 0),
    "goodput_frame_sizes": _pos_ints,
    "goodput_rates": _pos_ints,
    "formats": _choices(FORMATS),
    "output": lambda s: s,
    "traces": _bool,
}

SYSTEM_KEYS = {
    "ports": lambda s: _int(s, 2),
    "rate": lambda s: _int(s, 1),
    "rates": _pos_ints,
    "cell_latency": lambda s: _int(s, 0),
    "buffer": lambda s: None if s.lower() in ("infinite", "none", "unbounded") else _int(s, 1),
    "modules": lambda s: _int(s, 1),
    "propagation": lambda s: _int(s, 0),
}

BACKGROUND_KEYS = {
    "kind": lambda s: _choices(("none", "ubr", "cbr"))(s)[0] if _list(s) else "none",
    "rate": lambda s: _float(s) if s.strip() else 0.0,
    "frame_size": lambda s: _int(s, 1),
}


def _expectation(metric: str, s: str) -> Expectation:
    vals = [_float(x) for x in _list(s)]
    if len(vals) != 2:
        raise ValueError("expected 'lo, hi'")
    if vals[0] > vals[1]:
        raise ValueError(f"lower bound {vals[0]} exceeds upper bound {vals[1]}")
    return Expectation(metric, vals[0], vals[1])


def parse_spec(text: str) -> TestSpec:
    """Parse and validate spec text; defaults are resolved in the result."""
    sections: dict[str, dict[str, tuple[int, object]]] = {"": {}, "system": {}, "background": {}}
    tables = {"": TOP_KEYS, "system": SYSTEM_KEYS, "background": BACKGROUND_KEYS}
    expects: list[tuple[int, Expectation]] = []
    current = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in ("system", "background"):
                raise SpecError(f"unknown block [{name}]", lineno)
            current = name
            continue
        if "=" not in line:
            raise SpecError("expected 'key = value'", lineno)
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.lower()
        if current == "" and key.startswith("expect."):
            metric = key[len("expect."):]
            if not metric:
                raise SpecError("missing metric name", lineno, key)
            try:
                expects.append((lineno, _expectation(metric, value)))
            except ValueError as exc:
                raise SpecError(str(exc), lineno, key) from None
            continue
        table = tables[current]
        if key not in table:
            where = f"[{current}] block" if current else "top level"
            raise SpecError(f"unknown key at {where}", lineno, key)
        if key in sections[current]:
            raise SpecError("key given twice", lineno, key)
        try:
            sections[current][key] = (lineno, table[key](value))
        except ValueError as exc:
            raise SpecError(str(exc), lineno, key) from None

    top, sysd, bg = sections[""], sections["system"], sections["background"]
    if not sysd:
        raise SpecError("missing [system] block")
    if "seed" not in top:
        raise SpecError("seed is mandatory", field="seed")
    system = _build_system(sysd)
    background = _build_background(bg)
    kw = {k: v for k, (_, v) in top.items()}
    kw["expect"] = tuple(e for _, e in expects)
    spec = TestSpec(system=system, background=background, **kw)
    _validate(spec, top)
    return spec


def load_spec(path) -> TestSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


def _build_system(sysd) -> SystemSpec:
    if "ports" not in sysd:
        raise SpecError("missing port count", field="ports")
    line, ports = sysd["ports"]
    if ("rate" in sysd) == ("rates" in sysd):
        raise SpecError("give exactly one of 'rate' or 'rates'", line, "rate")
    if "rate" in sysd:
        rates = (sysd["rate"][1],) * ports
    else:
        rline, rates = sysd["rates"]
        if len(rates) != ports:
            raise SpecError(f"{len(rates)} rates for {ports} ports", rline, "rates")
    kw = {k: v for k, (_, v) in sysd.items() if k not in ("ports", "rate", "rates")}
    if "modules" in sysd and sysd["modules"][1] > ports:
        raise SpecError(f"more network modules than ports ({ports})", sysd["modules"][0], "modules")
    return SystemSpec(ports=ports, rates=tuple(rates), **kw)


def _build_background(bg) -> BackgroundSpec:
    spec = BackgroundSpec(**{k: v for k, (_, v) in bg.items()})
    if spec.kind != "none" and spec.rate <= 0:
        line = bg["rate"][0] if "rate" in bg else bg["kind"][0]
        raise SpecError("background traffic needs a positive rate", line, "rate")
    return spec


def _validate(spec: TestSpec, top) -> None:
    n = spec.system.ports

    def fail(key, msg):
        raise SpecError(msg, top[key][0] if key in top else None, key)

    if "k_to_1" in spec.configs:
        if spec.k > n - 1:
            fail("k", f"k-to-1 needs k <= ports - 1 = {n - 1}, got {spec.k}")
        if spec.k_output >= n:
            fail("k_output", f"port {spec.k_output} does not exist on a {n}-port switch")
    if "partial_cross" in spec.configs and spec.m > n - 1:
        fail("m", f"partial cross needs m <= ports - 1 = {n - 1}, got {spec.m}")
    if spec.latency_input >= n:
        fail("latency_input", f"port {spec.latency_input} does not exist on a {n}-port switch")
    if spec.latency_output is not None:
        if spec.latency_output >= n:
            fail("latency_output", f"port {spec.latency_output} does not exist on a {n}-port switch")
        if spec.latency_output == spec.latency_input:
            fail("latency_output", "latency input and output ports must differ")
    if "throughput" in spec.metrics and spec.load_ladder[-1] != 1.0:
        fail("load_ladder", "the throughput ladder must end at full load 1.0")
    if "latency" in spec.metrics and spec.background.kind != "none" and n < 3:
        fail("metrics", "latency background layouts need at least 3 ports")


def expand_throughput_matrix(spec: TestSpec) -> list[tuple[str, int, int, float]]:
    """Ladder runs of the throughput suite as (config, frame size, repetition, load)."""
    if "throughput" not in spec.metrics:
        return []
    return [
        (cfg, size, rep, load)
        for cfg in spec.configs
        for size in spec.frame_sizes
        for rep in range(spec.repetitions)
        for load in spec.load_ladder
    ]


def with_overrides(spec: TestSpec, *, seed=None, repetitions=None, formats=None, output=None) -> TestSpec:
    kw = {}
    if seed is not None:
        kw["seed"] = seed
    if repetitions is not None:
        if repetitions < 1:
            raise SpecError("repetitions must be >= 1", field="repetitions")
        kw["repetitions"] = repetitions
    if formats is not None:
        kw["formats"] = formats
    if output is not None:
        kw["output"] = output
    return replace(spec, **kw) if kw else spec

