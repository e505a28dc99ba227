"""Run-matrix execution and aggregate derivation."""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..aal import LinkRate, ServiceClass
from ..metrics.latency import (
    call_establishment_latency,
    frame_events,
    frame_table,
    latency_stats,
    mimo_from_events,
)
from ..metrics.loss import application_goodput
from ..metrics.procedures import Scenario, lossless_throughput, mfbs, peak_throughput
from ..simulator.engine import routes_from_config, run_signaling_exchange, simulate
from ..simulator.model import InvalidSpecError, NetworkModel, Route, SwitchModel, TrafficSpec
from ..topology import ConfigKind, build_config, build_latency_background, default_module_map
from .spec import TestSpec
from .tracefile import write_trace

__all__ = [
    "RUN_FIELDS",
    "AGG_FIELDS",
    "MetricReport",
    "RunError",
    "run_suite",
    "derive_aggregates",
    "check_expectations",
]

_log = logging.getLogger(__name__)

RUN_FIELDS = (
    "run_id", "suite", "config", "frame_size", "rep", "phase", "load",
    "offered_bps", "delivered_bps", "in_frames", "out_frames", "flr", "fairness",
    "p", "lat_mean", "lat_stddev", "lat_stderr", "lat_ci_lo", "lat_ci_hi", "value",
)
AGG_FIELDS = ("suite", "config", "frame_size", "metric", "value", "n_runs")

UNITS = {
    "lossless": "effective payload bits/sec",
    "peak": "effective payload bits/sec",
    "full_load": "effective payload bits/sec",
    "mean_fairness": "index",
    "peak_flr": "ratio",
    "full_load_flr": "ratio",
    "mfbs": "octets",
    "call_latency": "ticks (ns)",
    "goodput": "ratio",
}


class RunError(RuntimeError):
    """A run in the matrix failed; the message names its coordinates."""


@dataclass
class MetricReport:
    spec: TestSpec
    runs: list[dict] = field(default_factory=list)
    aggregates: list[dict] = field(default_factory=list)


def _row(**kw) -> dict:
    row = dict.fromkeys(RUN_FIELDS)
    row.update(kw)
    return row


class _Recorder(Scenario):
    """Scenario that remembers every load it was run at."""

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "seen", {})

    def run(self, load: float):
        if load not in self.seen:
            self.seen[load] = super().run(load)
        return self.seen[load]


def _rep_seed(spec: TestSpec, *coords) -> int:
    return random.Random(":".join(str(c) for c in (spec.seed, *coords))).getrandbits(32)


def _switch(spec: TestSpec, loopback=()) -> SwitchModel:
    s = spec.system
    return SwitchModel(
        n_ports=s.ports,
        link_rates=tuple(LinkRate(r) for r in s.rates),
        module_of=default_module_map(s.ports, s.modules),
        cell_latency=s.cell_latency,
        buffer_cells=s.buffer,
        loopback=frozenset(loopback),
    )


def _config(spec: TestSpec, name: str):
    return build_config(name, spec.system.ports, m=spec.m, k=spec.k, out_port=spec.k_output)


def _background_traffic(spec: TestSpec, routes: dict[int, Route], start: int, duration: int) -> list[TrafficSpec]:
    bg = spec.background
    cls = ServiceClass.CBR if bg.kind == "cbr" else ServiceClass.UBR
    return [TrafficSpec(v, cls, bg.frame_size, bg.rate, start_tick=start, duration=duration)
            for v in sorted(routes)]


# ---- suites --------------------------------------------------------------------

def _throughput(spec: TestSpec, rows: list[dict], outdir: Path | None, backend) -> None:
    network = NetworkModel.single(_switch(spec))
    for cfg_name in spec.configs:
        cfg = _config(spec, cfg_name)
        for size in spec.frame_sizes:
            for rep in range(spec.repetitions):
                scn = _Recorder(network, cfg, size, duration=spec.duration, warmup_fraction=spec.warmup,
                                seed=_rep_seed(spec, "throughput", cfg_name, size, rep), backend=backend,
                                keep_trace=spec.traces)
                for load in spec.load_ladder:
                    scn.run(load)
                if spec.search:
                    lossless_throughput(scn, spec.resolution)
                    peak_throughput(scn, spec.load_ladder, spec.refine_steps)
                ladder = set(spec.load_ladder)
                order = list(spec.load_ladder) + [L for L in scn.seen if L not in ladder]
                for load in order:
                    r = scn.seen[load]
                    rows.append(_row(
                        suite="throughput", config=cfg_name, frame_size=size, rep=rep,
                        phase="ladder" if load in ladder else "search", load=load,
                        offered_bps=r.offered_bps, delivered_bps=r.delivered_bps,
                        in_frames=r.in_frames, out_frames=r.out_frames, flr=r.flr,
                        fairness=float(r.fairness),
                    ))
                    if spec.traces and outdir is not None and load == 1.0 and r.trace is not None:
                        write_trace(r.trace, outdir / f"trace-{cfg_name}-{size}-rep{rep}.tsv")


def _latency(spec: TestSpec, rows: list[dict], backend) -> None:
    s = spec.system
    if spec.background.kind == "none":
        layouts = ["none"]
    else:
        layouts = [c for c in spec.configs if c != ConfigKind.K_TO_1.value]
        if len(layouts) < len(spec.configs):
            _log.warning("k_to_1 is not a background layout; skipped in the latency suite")
    for layout in layouts:
        if layout == "none":
            fg_out = spec.latency_output
            if fg_out is None:
                fg_out = (spec.latency_input + 1) % s.ports
            network = NetworkModel.single(_switch(spec))
            fg_in, bg_routes = spec.latency_input, {}
        else:
            fg, bg_cfg, _ = build_latency_background(
                s.ports, layout, m=spec.m, link_rates=s.rates,
                module_map=default_module_map(s.ports, s.modules),
                fg_input=spec.latency_input, fg_output=spec.latency_output,
            )
            fg_in, fg_out = fg.input_port, fg.output_ports[0]
            network = NetworkModel.single(_switch(spec, bg_cfg.loopback))
            bg_routes = routes_from_config(bg_cfg, network)
        fg_route = Route((0, fg_in), (((0, fg_out),),))
        for size in spec.frame_sizes:
            ffl = min(network.rate(0, fg_in), network.rate(0, fg_out),
                      key=lambda r: r.bits_per_second).payload_capacity(size)
            for rep in range(spec.repetitions):
                rng = random.Random(_rep_seed(spec, "latency", layout, size, rep))
                rate = spec.latency_start * ffl
                rung = 0
                while True:
                    n_frames = spec.latency_warmup_frames + spec.p
                    span = math.ceil(n_frames * 8 * size * 1e9 / rate)
                    # background starts first so the foreground meets a steady load
                    lead = int(rng.random() * 1000) + 1000 * s.ports
                    bg = _background_traffic(spec, bg_routes, 0, span + 2 * lead) if bg_routes else []
                    fg_spec = TrafficSpec(0, ServiceClass.UBR, size, rate, start_tick=lead, frame_count=n_frames)
                    routes = {0: fg_route, **bg_routes}
                    tr = simulate(network, None, [fg_spec, *bg], routes=routes, backend=backend).for_vcs([0])
                    table = frame_table(tr)
                    events = frame_events(tr, table)
                    order = np.argsort(table.frame_id, kind="stable")
                    window = [mimo_from_events(events[i])
                              for i in order[spec.latency_warmup_frames:spec.latency_warmup_frames + spec.p]]
                    st = latency_stats(window, spec.alpha)
                    rows.append(_row(
                        suite="latency", config=layout, frame_size=size, rep=rep, phase=f"rung{rung}",
                        load=rate / ffl, offered_bps=rate, p=st.p, lat_mean=st.mean,
                        lat_stddev=st.stddev, lat_stderr=st.stderr, lat_ci_lo=st.ci[0], lat_ci_hi=st.ci[1],
                        in_frames=len(window), out_frames=len(window) - st.lost_in_window,
                    ))
                    if not st.bounded or rate >= ffl:
                        break
                    rate = min(rate * spec.latency_factor, ffl)
                    rung += 1


def _mfbs(spec: TestSpec, rows: list[dict], backend) -> None:
    network = NetworkModel.single(_switch(spec))
    for cfg_name in spec.configs:
        cfg = _config(spec, cfg_name)
        routes = routes_from_config(cfg, network)
        others = {v: r for v, r in routes.items() if v != min(routes)}
        for size in spec.frame_sizes:
            for rep in range(spec.repetitions):
                bg = ()
                if spec.background.kind != "none" and others:
                    bg = tuple(_background_traffic(spec, others, 0, spec.duration))
                # the first VC bursts; the others carry the declared background
                scn = Scenario(network, cfg, size, duration=spec.duration,
                               seed=_rep_seed(spec, "mfbs", cfg_name, size, rep), background=bg,
                               background_routes=others if bg else {}, backend=backend)
                res = mfbs(scn, ceiling=spec.mfbs_ceiling)
                rows.append(_row(
                    suite="mfbs", config=cfg_name, frame_size=size, rep=rep,
                    phase=f"ceiling={spec.mfbs_ceiling}",
                    value="unbounded" if res.unbounded else res.octets,
                ))


def _call(spec: TestSpec, rows: list[dict], backend) -> None:
    s = spec.system
    n = spec.call_switches
    network = NetworkModel.chain(n, s.rates[0], s.cell_latency, s.buffer, s.propagation)
    path = Route((0, 0), (tuple((i, 1) for i in range(n)),))
    rate = LinkRate(s.rates[0]).payload_capacity(spec.call_message_octets)
    size = spec.call_message_octets
    for rep in range(spec.repetitions):
        setup = TrafficSpec(0, ServiceClass.SIGNALING, size, rate, frame_count=1)
        connect = TrafficSpec(1, ServiceClass.SIGNALING, size, rate, frame_count=1)
        a, b = run_signaling_exchange(network, path, setup, connect, spec.call_hold, backend=backend)
        rows.append(_row(
            suite="call", config=f"chain{n}", frame_size=size, rep=rep,
            phase=f"switches={n},hierarchies={spec.call_hierarchies}",
            value=call_establishment_latency(a, b),
        ))


def _goodput(spec: TestSpec, rows: list[dict], backend) -> None:
    network = NetworkModel.single(_switch(spec))
    for cfg_name in spec.configs:
        cfg = _config(spec, cfg_name)
        routes = routes_from_config(cfg, network)
        for size in spec.goodput_frame_sizes:
            for fps in spec.goodput_rates:
                bps = fps * 8 * size
                cap = min(network.rate(*r.ingress).payload_capacity(size) for r in routes.values())
                if bps > cap:
                    _log.warning("goodput: %d fps of %d B exceeds the link payload capacity; skipped", fps, size)
                    continue
                for rep in range(spec.repetitions):
                    rng = random.Random(_rep_seed(spec, "goodput", cfg_name, size, fps, rep))
                    interval = 1e9 / fps
                    traffic = [TrafficSpec(v, ServiceClass.UBR, size, bps, start_tick=int(rng.random() * interval),
                                           duration=spec.duration) for v in sorted(routes)]
                    tr = simulate(network, None, traffic, routes=routes, backend=backend)
                    table = frame_table(tr)
                    w0 = int(spec.duration * spec.warmup)
                    win = (table.t1 >= w0) & (table.t2 <= spec.duration)
                    n_in = int(win.sum())
                    n_out = int((win & table.delivered).sum())
                    rows.append(_row(
                        suite="goodput", config=cfg_name, frame_size=size, rep=rep, phase=f"{fps}fps",
                        offered_bps=float(bps * len(routes)), in_frames=n_in, out_frames=n_out,
                        value=float(application_goodput(n_out, n_in)) if n_in else None,
                    ))


_SUITE_FUNCS = {
    "throughput": lambda spec, rows, outdir, backend: _throughput(spec, rows, outdir, backend),
    "latency": lambda spec, rows, outdir, backend: _latency(spec, rows, backend),
    "mfbs": lambda spec, rows, outdir, backend: _mfbs(spec, rows, backend),
    "call": lambda spec, rows, outdir, backend: _call(spec, rows, backend),
    "goodput": lambda spec, rows, outdir, backend: _goodput(spec, rows, backend),
}


def run_suite(spec: TestSpec, outdir: Path | None = None, backend: str | None = None) -> MetricReport:
    """Execute every selected suite of the matrix and derive the aggregates."""
    rows: list[dict] = []
    for suite in spec.metrics:
        _log.info("suite %s", suite)
        before = len(rows)
        try:
            _SUITE_FUNCS[suite](spec, rows, outdir, backend)
        except (InvalidSpecError, ValueError) as exc:
            raise RunError(f"{suite} suite, after run {len(rows)}: {exc}") from exc
        _log.info("suite %s: %d runs", suite, len(rows) - before)
    for i, r in enumerate(rows):
        r["run_id"] = i
    return MetricReport(spec, rows, derive_aggregates(rows))


# ---- aggregates ------------------------------------------------------------------

def _mean(xs) -> float:
    xs = list(xs)
    return math.fsum(xs) / len(xs)


def _ratio_flr(rows) -> float:
    n_in = sum(r["in_frames"] for r in rows)
    n_out = sum(r["out_frames"] for r in rows)
    return (n_in - n_out) / n_in if n_in else 0.0


def _groups(rows, suite, extra=lambda r: ()):
    out: dict[tuple, list[dict]] = {}
    for r in rows:
        if r["suite"] == suite:
            out.setdefault((r["config"], r["frame_size"], *extra(r)), []).append(r)
    return out


def _agg(suite, config, size, metric, value, n_runs) -> dict:
    return dict(zip(AGG_FIELDS, (suite, config, size, metric, value, n_runs)))


def derive_aggregates(rows: list[dict]) -> list[dict]:
    """Aggregate rows from per-run rows alone.

    Throughput levels per repetition: lossless is the highest delivered rate
    among loss-free runs, peak the highest delivered rate overall, full load
    the delivered rate at load 1.0; the aggregate is the mean over
    repetitions.  Fairness is averaged over the full-load runs; frame loss
    ratios are ratios of sums over repetitions.
    """
    aggs: list[dict] = []
    for (cfg, size), grp in _groups(rows, "throughput").items():
        reps: dict[int, list[dict]] = {}
        for r in grp:
            reps.setdefault(r["rep"], []).append(r)
        lossless, peak, full, peak_rows, full_rows = [], [], [], [], []
        for rep in sorted(reps):
            rr = reps[rep]
            ok = [r["delivered_bps"] for r in rr if r["in_frames"] == r["out_frames"]]
            lossless.append(max(ok) if ok else 0.0)
            best = max(rr, key=lambda r: (r["delivered_bps"], -r["load"]))
            peak.append(best["delivered_bps"])
            peak_rows.append(best)
            top = [r for r in rr if r["load"] == 1.0]
            full.extend(r["delivered_bps"] for r in top)
            full_rows.extend(top)
        n = len(reps)
        aggs.append(_agg("throughput", cfg, size, "lossless", _mean(lossless), n))
        aggs.append(_agg("throughput", cfg, size, "peak", _mean(peak), n))
        if full_rows:
            aggs.append(_agg("throughput", cfg, size, "full_load", _mean(full), n))
            aggs.append(_agg("throughput", cfg, size, "mean_fairness", _mean(r["fairness"] for r in full_rows), n))
            aggs.append(_agg("throughput", cfg, size, "full_load_flr", _ratio_flr(full_rows), n))
        aggs.append(_agg("throughput", cfg, size, "peak_flr", _ratio_flr(peak_rows), n))
    for (cfg, size), grp in _groups(rows, "mfbs").items():
        bounded = [r["value"] for r in grp if r["value"] != "unbounded"]
        aggs.append(_agg("mfbs", cfg, size, "mfbs", min(bounded) if bounded else "unbounded", len(grp)))
    for (cfg, size), grp in _groups(rows, "call").items():
        aggs.append(_agg("call", cfg, size, "call_latency", _mean(r["value"] for r in grp), len(grp)))
    for (cfg, size, phase), grp in _groups(rows, "goodput", lambda r: (r["phase"],)).items():
        n_in = sum(r["in_frames"] for r in grp)
        n_out = sum(r["out_frames"] for r in grp)
        if n_in:
            aggs.append(_agg("goodput", cfg, size, f"goodput@{phase}", n_out / n_in, len(grp)))
    return aggs


def check_expectations(report: MetricReport) -> list[str]:
    """Violations of the test spec's ``expect.<metric>`` bounds, as messages."""
    problems = []
    for e in report.spec.expect:
        hits = [a for a in report.aggregates if a["metric"] == e.metric]
        if not hits:
            problems.append(f"expect.{e.metric}: no aggregate of that name in the report")
        for a in hits:
            v = a["value"]
            if not isinstance(v, (int, float)) or not e.lo <= v <= e.hi:
                problems.append(f"expect.{e.metric}: {a['config']} {a['frame_size']} B = {v!r} "
                                f"outside [{e.lo!r}, {e.hi!r}]")
    return problems
