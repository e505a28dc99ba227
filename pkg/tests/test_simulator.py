import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellbench.aal import LinkRate, ServiceClass
from cellbench.simulator import (
    InvalidSpecError,
    MonitorModel,
    NetworkModel,
    Route,
    SwitchModel,
    TrafficSpec,
    calibrate_monitor_overhead,
    monitor_ctd,
    routes_from_config,
    run_signaling_exchange,
    simulate,
)
from cellbench.simulator import kernel
from cellbench.topology import build_k_to_1, build_loopback_throughput, build_multicast

RATE = 424_000_000  # cell time of exactly 1000 ticks
CT = 1000

needs_cython = pytest.mark.skipif(kernel.compiled_run_events is None, reason="compiled kernel not built")


def one_switch(n=4, buffer=16, latency=0, rate=RATE):
    return NetworkModel.single(SwitchModel.uniform(n, rate, cell_latency=latency, buffer_cells=buffer))


def route(i, o, s=0):
    return Route((s, i), (((s, o),),))


@st.composite
def scenarios(draw):
    n = draw(st.integers(2, 4))
    rates = tuple(LinkRate(draw(st.sampled_from([RATE, 155_520_000, 622_080_000]))) for _ in range(n))
    buffer = draw(st.one_of(st.none(), st.integers(1, 12)))
    sw = SwitchModel(n, rates, tuple(p % 2 for p in range(n)), cell_latency=draw(st.integers(0, 2500)),
                     buffer_cells=buffer)
    net = NetworkModel.single(sw)
    routes, traffic, share = {}, [], {}
    for vid in range(draw(st.integers(1, 5))):
        i = draw(st.integers(0, n - 1))
        o = draw(st.integers(0, n - 1).filter(lambda x: x != i))
        routes[vid] = route(i, o)
        share[i] = share.get(i, 0) + 1
    for vid, r in routes.items():
        i = r.ingress[1]
        cls = draw(st.sampled_from([ServiceClass.UBR, ServiceClass.CBR]))
        P = draw(st.sampled_from([1, 40, 64, 300]))
        frac = draw(st.floats(0.05, 1.0)) / share[i]
        cap = rates[i].cells_per_second * (384 if cls is ServiceClass.CBR else 1)
        bps = frac * cap if cls is ServiceClass.CBR else frac * rates[i].payload_capacity(P)
        traffic.append(TrafficSpec(vid, cls, P, bps, start_tick=draw(st.integers(0, 5000)),
                                   frame_count=draw(st.integers(1, 30))))
    return net, routes, traffic


@needs_cython
@settings(max_examples=60)
@given(scenarios())
def test_backends_bit_identical(sc):
    net, routes, traffic = sc
    a = simulate(net, None, traffic, routes=routes, backend="python")
    b = simulate(net, None, traffic, routes=routes, backend="cython")
    assert a.same_as(b)


@settings(max_examples=40)
@given(scenarios())
def test_conservation_and_fifo(sc):
    net, routes, traffic = sc
    tr = simulate(net, None, traffic, routes=routes)
    delivered = tr.delivered
    dropped = tr.drop_port != -1
    assert np.all(delivered ^ dropped)
    inj, dl, dr = tr.counts()
    assert dl + dr == inj
    for vid in routes:
        sel = (tr.vc_id == vid) & delivered
        order = np.lexsort((tr.seq[sel], tr.frame_id[sel], tr.entry_first[sel]))
        exits = tr.exit_last[sel][order]
        assert np.all(np.diff(exits) > 0)


def test_deterministic():
    net = one_switch()
    routes = {0: route(1, 0), 1: route(2, 0)}
    traffic = [TrafficSpec(v, ServiceClass.UBR, 64, 0.9 * LinkRate(RATE).payload_capacity(64), duration=200_000)
               for v in routes]
    a = simulate(net, None, traffic, routes=routes)
    b = simulate(net, None, traffic, routes=routes)
    assert a.same_as(b)


def _slot_oracle_drops(n_slots: int, buffer: int) -> int:
    """Two line-rate single-cell sources into one output, cell aligned.

    The waiting room holds ``buffer`` cells; one more is admitted when the
    output starts a transmission at the same tick.
    """
    occ, start_at, delivered = 0, None, 0
    for k in range(n_slots):
        t = (k + 1) * CT
        for _ in range(2):
            idle = start_at is None or start_at < t
            if idle:
                start_at = t
            limit = buffer + 1 if start_at == t else buffer
            if occ < limit:
                occ += 1
        if start_at == t:
            if occ:
                occ -= 1
                delivered += 1
                start_at = t + CT
            else:
                start_at = None
    delivered += occ
    return 2 * n_slots - delivered


@pytest.mark.parametrize("buffer, n_slots", [(1, 10), (4, 50), (16, 200), (3, 3)])
def test_k_to_1_drops_match_slot_oracle(buffer, n_slots):
    net = one_switch(buffer=buffer)
    cfg = build_k_to_1(2, 0, 4)
    cap = LinkRate(RATE).payload_capacity(40)
    traffic = [TrafficSpec(vc.vc_id, ServiceClass.UBR, 40, cap, frame_count=n_slots) for vc in cfg.vcs]
    tr = simulate(net, cfg, traffic)
    inj, dl, dr = tr.counts()
    assert inj == 2 * n_slots and dl + dr == inj
    assert dr == _slot_oracle_drops(n_slots, buffer)


def test_no_loss_with_unbounded_buffer():
    net = one_switch(buffer=None)
    cfg = build_k_to_1(3, 0, 4)
    cap = LinkRate(RATE).payload_capacity(64)
    traffic = [TrafficSpec(vc.vc_id, ServiceClass.UBR, 64, cap, duration=100_000) for vc in cfg.vcs]
    tr = simulate(net, cfg, traffic)
    assert tr.delivered.all()


def test_cbr_never_waits_behind_ubr():
    lat = 700
    net = one_switch(buffer=None, latency=lat)
    routes = {0: route(0, 2), 1: route(1, 2), 3: route(3, 2)}
    ubr_cap = LinkRate(RATE).payload_capacity(1518)
    traffic = [
        TrafficSpec(0, ServiceClass.CBR, 48, 0.1 * LinkRate(RATE).cells_per_second * 384, start_tick=3333,
                    frame_count=200),
        TrafficSpec(1, ServiceClass.UBR, 1518, ubr_cap, duration=2_000_000),
        TrafficSpec(3, ServiceClass.UBR, 1518, ubr_cap, duration=2_000_000),
    ]
    tr = simulate(net, None, traffic, routes=routes)
    cbr = tr.vc_id == 0
    assert (tr.frame_id[cbr] == -1).all()
    delay = tr.exit_last[cbr] - tr.entry_first[cbr]
    # input cell time + latency + at most one cell already on the wire + own transmission
    assert delay.max() <= CT + lat + 2 * CT
    ubr_delay = tr.exit_last[~cbr] - tr.entry_first[~cbr]
    assert ubr_delay.max() > 100 * CT  # the UBR backlog really exists


def test_unloaded_cell_delay():
    net = one_switch(latency=1234)
    tr = simulate(net, None, [TrafficSpec(0, ServiceClass.UBR, 1518, 1e7, frame_count=3)], routes={0: route(0, 1)})
    assert set((tr.exit_last - tr.entry_first).tolist()) == {CT + 1234 + CT}


def test_oversubscribed_ingress_rejected():
    net = one_switch()
    spec = TrafficSpec(0, ServiceClass.UBR, 64, 1.01 * LinkRate(RATE).payload_capacity(64), frame_count=5)
    with pytest.raises(InvalidSpecError):
        simulate(net, None, [spec], routes={0: route(0, 1)})


def test_invalid_routes_rejected():
    net = one_switch()
    spec = TrafficSpec(0, ServiceClass.UBR, 64, 1e6, frame_count=1)
    with pytest.raises(InvalidSpecError):
        simulate(net, None, [spec], routes={0: route(0, 9)})
    with pytest.raises(InvalidSpecError):
        simulate(net, None, [spec], routes={1: route(0, 1)})


def test_multicast_replication():
    net = one_switch(n=5)
    cfg = build_multicast(5, root=0)
    tr = simulate(net, cfg, [TrafficSpec(0, ServiceClass.UBR, 64, 1e7, frame_count=4)])
    assert len(tr) == 4 * 2 * 4
    assert sorted(set(tr.out_port.tolist())) == [1, 2, 3, 4]
    assert tr.delivered.all()


def test_loopback_chains_deliver_everything():
    cfg, loop = build_loopback_throughput(4, 2)
    sw = SwitchModel.uniform(4, RATE, cell_latency=100, buffer_cells=8, loopback=loop)
    net = NetworkModel.single(sw)
    routes = routes_from_config(cfg, net)
    assert len(routes) == 2
    hops = sum(len(r.leaves[0]) for r in routes.values())
    assert hops == 8
    traffic = [TrafficSpec(v, ServiceClass.UBR, 64, 0.4 * LinkRate(RATE).payload_capacity(64), duration=50_000)
               for v in routes]
    tr = simulate(net, None, traffic, routes=routes)
    assert tr.delivered.all()
    assert set(tr.out_port.tolist()) == {0}
    for v, r in routes.items():
        sel = tr.vc_id == v
        assert (tr.exit_last[sel] - tr.entry_first[sel]).min() >= len(r.leaves[0]) * (100 + CT)


def test_monitor_calibration_excludes_propagation():
    assert calibrate_monitor_overhead(MonitorModel(overhead=500, propagation=300)) == 500
    net = one_switch()
    tr = simulate(net, None, [TrafficSpec(0, ServiceClass.UBR, 64, 1e6, frame_count=1)], routes={0: route(0, 1)})
    mon = MonitorModel(overhead=40, propagation=60)
    assert monitor_ctd(tr, 0, mon) == int(tr.exit_last[0] - tr.entry_first[0]) + 100


def _signaling(hold, n_switches=3):
    net = NetworkModel.chain(n_switches, 155_520_000, cell_latency=900, propagation=5000)
    path = Route((0, 0), (tuple((i, 1) for i in range(n_switches)),))
    link = LinkRate(155_520_000)
    setup = TrafficSpec(0, ServiceClass.SIGNALING, 120, link.payload_capacity(120), frame_count=1)
    connect = TrafficSpec(1, ServiceClass.SIGNALING, 96, link.payload_capacity(96), frame_count=1)
    return run_signaling_exchange(net, path, setup, connect, destination_hold=hold)


def test_signaling_hold_invisible():
    a0, b0 = _signaling(0)
    a1, b1 = _signaling(10**6)
    assert a0.same_as(a1) and b0.same_as(b1)
    assert b0.out_port.tolist()[0] == 0  # CONNECT leaves at the calling side


def test_signaling_requires_signaling_class():
    net = NetworkModel.chain(1, RATE)
    path = Route((0, 0), (((0, 1),),))
    spec = TrafficSpec(0, ServiceClass.UBR, 64, 1e6, frame_count=1)
    with pytest.raises(InvalidSpecError):
        run_signaling_exchange(net, path, spec, spec)


def test_backend_selection():
    assert kernel.get_run_events("python") is kernel.python_run_events
    with pytest.raises(ValueError):
        kernel.get_run_events("fortran")
