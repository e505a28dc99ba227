"""Acceptance criteria, one test per criterion.

Each test records a one-line verdict in ``RESULTS``; conftest prints them in
the terminal summary so a run shows every criterion with its outcome.
"""

import math
import random
import time
from fractions import Fraction

from cellbench.aal import LinkRate, ServiceClass
from cellbench.harness.cli import main as cli_main
from cellbench.metrics import (
    average_flr,
    call_establishment_latency,
    fairness_index,
    frame_events,
    frame_table,
    latency_stats,
    mimo_from_cell_readings,
    mimo_from_events,
    z_quantile,
)
from cellbench.metrics.procedures import Scenario, mfbs, throughput_levels
from cellbench.simulator import (
    MonitorModel,
    NetworkModel,
    Route,
    SwitchModel,
    TrafficSpec,
    calibrate_monitor_overhead,
    run_signaling_exchange,
    simulate,
)
from cellbench.topology import (
    ConnectionConfig,
    ConfigKind,
    VC,
    build_full_cross,
    build_k_to_1,
    build_loopback_throughput,
    build_multicast,
    build_partial_cross,
    build_straight,
    max_min_allocation,
)

from maxmin_oracle import CORPUS, oracle_max_min

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = f"[criterion {n:2d}] {'PASS' if ok else 'FAIL'}: {detail}"
    assert ok, RESULTS[n]


def test_criterion_01_fairness_anchors():
    worst, cases = 0.0, 0
    ok = True
    for n in range(1, 65):
        ideal = [3] * n
        ok &= fairness_index([3] * n, ideal) == 1
        ok &= float(fairness_index([3.0] * n, [3.0] * n)) == 1.0
        for k in range(1, n + 1):
            alloc = [3] * k + [0] * (n - k)
            ok &= fairness_index(alloc, ideal) == Fraction(k, n)
            f = float(fairness_index([2.5] * k + [0.0] * (n - k), [2.5] * n))
            worst = max(worst, abs(f - k / n))
            cases += 1
    ok &= worst <= 1e-12
    record(1, ok, f"{cases} k-of-n cases exact in rationals, worst float error {worst:.1e}")


def _cross_path_frames(ri, ro, frames):
    sw = SwitchModel(3, (LinkRate(ri), LinkRate(ro), LinkRate(ri)), (0, 1, 0), cell_latency=800, buffer_cells=None)
    net = NetworkModel.single(sw)
    cap = min(LinkRate(ri).payload_capacity(1518), LinkRate(ro).payload_capacity(1518))
    span = int(frames * 8 * 1518 * 1e9 / (0.4 * cap))
    slow = min(LinkRate(ri), LinkRate(ro), key=lambda r: r.bits_per_second)
    traffic = [TrafficSpec(0, ServiceClass.UBR, 1518, 0.4 * cap, frame_count=frames),
               TrafficSpec(1, ServiceClass.UBR, 64, 0.3 * slow.payload_capacity(64), start_tick=999, duration=span)]
    routes = {0: Route((0, 0), (((0, 1),),)), 1: Route((0, 2), (((0, 1),),))}
    return simulate(net, None, traffic, routes=routes).for_vcs([0])


def test_criterion_02_mimo_cross_path():
    t0 = time.perf_counter()
    mon = MonitorModel(overhead=calibrate_monitor_overhead(MonitorModel(overhead=650, propagation=1200)),
                       propagation=1200)
    pairs = [(155_520_000, 622_080_000), (155_520_000, 155_520_000), (622_080_000, 155_520_000)]
    total, mismatches = 0, 0
    for ri, ro in pairs:
        tr = _cross_path_frames(ri, ro, 340)
        table = frame_table(tr)
        for i, e in enumerate(frame_events(tr, table)):
            total += 1
            mismatches += mimo_from_cell_readings(tr, table, i, mon) != mimo_from_events(e)
    secs = time.perf_counter() - t0
    record(2, total >= 1000 and mismatches == 0 and secs < 10,
           f"{total} frames over 3 rate pairs, {mismatches} mismatches, {secs:.2f} s")


def test_criterion_03_latency_oracle():
    lat, rate = 1700, LinkRate(155_520_000)
    expected = lat + rate.cell_time  # derived: last bit out one cell time after eligibility
    got = {}
    for f in (1, 2, 32, 192):
        net = NetworkModel.single(SwitchModel.uniform(2, rate.bits_per_second, cell_latency=lat, buffer_cells=None))
        spec = TrafficSpec(0, ServiceClass.UBR, 48 * f - 8, rate.payload_capacity(48 * f - 8), frame_count=1)
        tr = simulate(net, None, [spec], routes={0: Route((0, 0), (((0, 1),),))})
        assert len(tr) == f
        got[f] = mimo_from_events(frame_events(tr)[0])
    record(3, all(v == expected for v in got.values()), f"expected {expected} ticks, got {got}")


def test_criterion_04_throughput_ordering():
    t0 = time.perf_counter()
    net = NetworkModel.single(SwitchModel.uniform(4, 155_520_000, cell_latency=1000, buffer_cells=64))
    scn = Scenario(net, build_k_to_1(2, 0, 4), 1518, duration=4_000_000, keep_trace=True)
    res = throughput_levels(scn)
    cap = LinkRate(155_520_000).payload_capacity(1518)
    full = scn.run(1.0)
    inj, dl, dr = full.trace.counts()
    secs = time.perf_counter() - t0
    ok = (res.lossless.rate <= res.peak.rate <= cap and abs(res.full_load_flr - 0.5) <= 0.02
          and dl + dr == inj and secs < 30)
    record(4, ok, f"lossless {res.lossless.rate:.4g} <= peak {res.peak.rate:.4g} <= capacity {cap:.4g}, "
                  f"full-load FLR {float(res.full_load_flr):.4f}, cells {dl}+{dr}={inj}, {secs:.2f} s")


def test_criterion_05_flr_averaging():
    got = average_flr([(100, 90), (300, 240)])
    naive = (Fraction(10, 100) + Fraction(60, 300)) / 2
    record(5, got == Fraction(7, 40) and got != naive and naive == Fraction(3, 20),
           f"ratio of sums {got} = {float(got)}, mean of ratios {float(naive)}")


def test_criterion_06_statistics():
    z = z_quantile(0.001)
    small = latency_stats([1.0, -1.0] * 50)
    big = latency_stats([1.0, -1.0] * 200)
    ratio = small.stderr / big.stderr
    record(6, abs(z - 3.291) <= 1e-3 and abs(ratio - 2) <= 0.02,
           f"z(0.001) = {z:.4f}, stderr ratio p=100 vs p=400 is {ratio:.4f}")


def _mfbs_instance(buffer, ri, ro):
    sw = SwitchModel(2, (LinkRate(ri), LinkRate(ro)), (0, 1), cell_latency=0, buffer_cells=buffer)
    cfg = ConnectionConfig(ConfigKind.STRAIGHT, (VC(0, 0, (1,)),), 2)
    return mfbs(Scenario(NetworkModel.single(sw), cfg, 40), ceiling=1 << 14)


def test_criterion_07_mfbs():
    rng = random.Random(7)
    worst, boundary_ok = 0.0, True
    for _ in range(10):
        buffer = rng.randint(4, 200)
        ri = rng.choice([155_520_000, 424_000_000, 622_080_000])
        ro = int(ri * rng.uniform(0.2, 0.8))
        res = _mfbs_instance(buffer, ri, ro)
        seen = dict(res.evaluations)
        boundary_ok &= not res.unbounded and seen.get(res.frames) is True and seen.get(res.frames + 1) is False
        r_i, r_o = LinkRate(ri).cells_per_second, LinkRate(ro).cells_per_second
        predicted = buffer * r_i / (r_i - r_o)  # one 40-octet frame per cell
        worst = max(worst, abs(res.frames - predicted))
    record(7, boundary_ok and worst <= 1, f"10 instances, boundary exact, worst distance from B*ri/(ri-ro) "
                                          f"{worst:.3f} frames")


def _call(hold):
    net = NetworkModel.chain(3, 155_520_000, cell_latency=900, propagation=5000)
    path = Route((0, 0), (((0, 1), (1, 1), (2, 1)),))
    cap = LinkRate(155_520_000).payload_capacity(64)
    setup = TrafficSpec(0, ServiceClass.SIGNALING, 64, cap, frame_count=1)
    connect = TrafficSpec(1, ServiceClass.SIGNALING, 64, cap, frame_count=1)
    return call_establishment_latency(*run_signaling_exchange(net, path, setup, connect, destination_hold=hold))


def test_criterion_08_call_latency():
    a, b = _call(0), _call(10**6)
    record(8, a == b, f"hold 0 gives {a} ticks, hold 10^6 gives {b} ticks")


SPEC = """seed = 99
metrics = throughput, latency, mfbs, call, goodput
configs = k_to_1, straight
frame_sizes = 64, 1518
load_ladder = 0.25, 0.5, 1.0
duration = 600000
p = 30
latency_warmup_frames = 5
mfbs_ceiling = 128
goodput_frame_sizes = 64
goodput_rates = 2000, 10000
repetitions = 2

[system]
ports = 4
rate = 155520000
cell_latency = 1000
buffer = 64

[background]
kind = ubr
rate = 20000000
"""


def test_criterion_09_determinism(tmp_path):
    spec = tmp_path / "d.spec"
    spec.write_text(SPEC)
    outs = []
    for name in ("a", "b"):
        assert cli_main(["run", str(spec), "-o", str(tmp_path / name), "--format", "csv,jsonl"]) == 0
        outs.append({f: (tmp_path / name / f).read_bytes() for f in ("report.csv", "report.jsonl")})
    same = outs[0] == outs[1]
    record(9, same, f"two runs, csv {len(outs[0]['report.csv'])} B and jsonl {len(outs[0]['report.jsonl'])} B, "
                    f"{'byte-identical' if same else 'differ'}")


def test_criterion_10_cardinalities():
    ok = True
    for n in range(2, 17):
        ok &= len(build_straight(n).vcs) == n
        ok &= len(build_full_cross(n).vcs) == n * (n - 1)
        ok &= all(len(build_partial_cross(n, m).vcs) == n * m for m in range(1, n))
        ok &= all(len(build_k_to_1(k, 0, n).vcs) == k for k in range(2, n))
        ok &= len(build_multicast(n).vcs) == 1
    loop, _ = build_loopback_throughput(8, 2)
    ok &= len(loop.vcs) == 16
    record(10, ok, f"five builders for n in 2..16 exact, loopback n=8 m=2 gives {len(loop.vcs)} VCs")


def test_criterion_11_max_min():
    bad = [i for i, (demands, caps, routes) in enumerate(CORPUS)
           if max_min_allocation(demands, caps, routes) != oracle_max_min(demands, caps, routes)]
    record(11, not bad and len(CORPUS) == 100, f"{len(CORPUS)} corpus cases, mismatches at {bad}")
