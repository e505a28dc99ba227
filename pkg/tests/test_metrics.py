import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cellbench.aal import LinkRate, ServiceClass
from cellbench.metrics import (
    UNBOUNDED,
    CalibrationError,
    FrameEvents,
    application_goodput,
    average_flr,
    call_establishment_latency,
    fairness_index,
    frame_events,
    frame_loss_ratio,
    frame_table,
    latency_stats,
    mean_fairness,
    mimo_from_cell_readings,
    mimo_from_cells_fast_input,
    mimo_from_cells_slow_input,
    mimo_from_events,
    nfot,
    z_quantile,
)
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

FAST, SLOW = LinkRate(2_000_000), LinkRate(1_000_000)


def test_nfot_examples():
    assert nfot(4, FAST, SLOW) == 8
    assert nfot(4, 200, 100) == 8
    assert nfot(5, SLOW, FAST) == 3  # 2.5 rounds half up
    with pytest.raises(ValueError):
        nfot(-1, FAST, SLOW)


def test_mimo_example():
    assert mimo_from_events(FrameEvents(0, 4, 12, FAST, SLOW)) == 4
    assert mimo_from_events(FrameEvents(0, 4, None, FAST, SLOW)) == UNBOUNDED


def test_frame_events_validation():
    with pytest.raises(ValueError):
        FrameEvents(5, 4, 10, FAST, SLOW)


@given(st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6))
def test_equal_rates_branches_coincide(t1, fit, wait):
    r = LinkRate(155_520_000)
    e = FrameEvents(t1, t1 + fit, t1 + fit + wait, r, r)
    lilo = e.t3 - e.t2
    assert e.t3 - e.t1 - nfot(fit, r, r) == lilo == mimo_from_events(e)


def test_slow_input_example():
    rate = LinkRate(1_060_000_000)
    assert rate.cell_time == 400
    assert mimo_from_cells_slow_input(1000, rate, MonitorModel()) == 600
    with pytest.raises(CalibrationError):
        mimo_from_cells_slow_input(300, rate, MonitorModel())


def test_fast_path_agrees_with_slow_path_at_equal_rates():
    r = LinkRate(155_520_000)
    mon = MonitorModel(overhead=70, propagation=30)
    ctd = 9000
    fast = mimo_from_cells_fast_input(ctd, 0, r, r, r.cell_time, mon)
    assert fast == mimo_from_cells_slow_input(ctd, r, mon)


@given(st.integers(0, 500))
def test_overhead_miscalibration_shifts_result(delta):
    r_in, r_out = LinkRate(622_080_000), LinkRate(155_520_000)
    mon = MonitorModel(overhead=1000)
    bad = MonitorModel(overhead=1000 + delta)
    args = (50_000, 20_000, r_in, r_out, 5000)
    assert mimo_from_cells_fast_input(*args, bad) == mimo_from_cells_fast_input(*args, mon) - delta


def _cross_path_trace(ri, ro, payload=1518, frames=30):
    sw = SwitchModel(3, (LinkRate(ri), LinkRate(ro), LinkRate(ri)), (0, 1, 0), cell_latency=800, buffer_cells=None)
    net = NetworkModel.single(sw)
    cap = min(LinkRate(ri).payload_capacity(payload), LinkRate(ro).payload_capacity(payload))
    span = int(frames * 8 * payload * 1e9 / (0.4 * cap))
    bg_cap = min(LinkRate(ri), LinkRate(ro), key=lambda r: r.bits_per_second).payload_capacity(64)
    traffic = [TrafficSpec(0, ServiceClass.UBR, payload, 0.4 * cap, frame_count=frames),
               TrafficSpec(1, ServiceClass.UBR, 64, 0.3 * bg_cap, start_tick=999, duration=span)]
    routes = {0: Route((0, 0), (((0, 1),),)), 1: Route((0, 2), (((0, 1),),))}
    return simulate(net, None, traffic, routes=routes).for_vcs([0])


@pytest.mark.parametrize("ri, ro", [(155_520_000, 622_080_000), (155_520_000, 155_520_000),
                                    (622_080_000, 155_520_000)])
@pytest.mark.parametrize("propagation", [0, 2500])
def test_cross_path_equivalence(ri, ro, propagation):
    overhead = calibrate_monitor_overhead(MonitorModel(overhead=650, propagation=propagation))
    mon = MonitorModel(overhead=overhead, propagation=propagation)
    tr = _cross_path_trace(ri, ro)
    table = frame_table(tr)
    events = frame_events(tr, table)
    assert len(table) == 30
    for i, e in enumerate(events):
        assert mimo_from_cell_readings(tr, table, i, mon) == mimo_from_events(e)


def test_latency_stats_example():
    s = latency_stats([2, 4, 4, 4, 5, 5, 7, 9], alpha=0.1)
    assert s.mean == 5
    assert s.stddev == pytest.approx(2.138, abs=5e-4)
    assert s.stderr == pytest.approx(0.756, abs=5e-4)
    assert s.stderr == pytest.approx(s.stddev / math.sqrt(8))
    z = z_quantile(0.1)
    assert s.ci == pytest.approx((5 - z * s.stderr, 5 + z * s.stderr))


@pytest.mark.parametrize("alpha, z", [(0.1, 1.645), (0.05, 1.960), (0.01, 2.576), (0.001, 3.291)])
def test_z_quantiles(alpha, z):
    assert z_quantile(alpha) == pytest.approx(z, abs=5e-4)


def test_latency_stats_unbounded_and_errors():
    s = latency_stats([1, 2, math.inf])
    assert math.isinf(s.mean) and s.lost_in_window == 1 and not s.bounded
    with pytest.raises(ValueError):
        latency_stats([1])
    with pytest.raises(ValueError):
        z_quantile(0)


def test_fairness_examples():
    assert fairness_index([1, 2, 3], [1, 1, 1]) == Fraction(36, 42)
    assert fairness_index([5, 5], [5, 5]) == 1
    assert mean_fairness([0.5, 1.0]) == 0.75
    with pytest.raises(ValueError):
        fairness_index([1], [0])
    with pytest.raises(ValueError):
        fairness_index([1, 2], [1])


@given(st.lists(st.integers(0, 1000), min_size=1, max_size=20), st.integers(1, 50))
def test_fairness_range_and_scaling(xs, scale):
    ideal = [7] * len(xs)
    f = fairness_index(xs, ideal)
    assert 0 <= f <= 1
    assert fairness_index([x * scale for x in xs], [t * scale for t in ideal]) == f
    if any(xs):
        assert (f == 1) == (len(set(xs)) == 1)


def test_flr_and_goodput():
    assert frame_loss_ratio(100, 90) == Fraction(1, 10)
    assert average_flr([(100, 90), (300, 240)]) == Fraction(7, 40)
    assert application_goodput(9000, 10000) == Fraction(9, 10)
    with pytest.raises(ValueError):
        frame_loss_ratio(0, 0)


@given(st.integers(1, 10**6), st.data())
def test_goodput_is_one_minus_flr(sent, data):
    got = data.draw(st.integers(0, sent))
    assert application_goodput(got, sent) == 1 - frame_loss_ratio(sent, got)


def _call_latency(n):
    net = NetworkModel.chain(n, 155_520_000, cell_latency=900, propagation=2000)
    path = Route((0, 0), (tuple((i, 1) for i in range(n)),))
    rate = LinkRate(155_520_000).payload_capacity(64)
    spec = TrafficSpec(0, ServiceClass.SIGNALING, 64, rate, frame_count=1)
    a, b = run_signaling_exchange(net, path, spec, TrafficSpec(1, ServiceClass.SIGNALING, 64, rate, frame_count=1))
    return call_establishment_latency(a, b)


def test_call_latency_grows_with_path():
    one, three = _call_latency(1), _call_latency(3)
    assert three >= one
    # unloaded: each direction pays latency + one output cell time per switch,
    # plus propagation on each inter-switch link
    ct = LinkRate(155_520_000).cell_time
    assert one == 2 * (900 + ct)
    assert three == 2 * (3 * (900 + ct) + 2 * 2000)
