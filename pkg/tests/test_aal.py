import pytest
from hypothesis import given
from hypothesis import strategies as st

from cellbench.aal import (
    LinkRate,
    LossIndication,
    ServiceClass,
    TraceCorruptionError,
    cell_rate_to_effective_rate,
    cells_per_frame,
    effective_rate_to_cell_rate,
    reassemble,
    round_half_up,
    segment_frame,
)


@pytest.mark.parametrize("payload, cells", [(40, 1), (64, 2), (1518, 32), (9188, 192), (65536, 1366)])
def test_cells_per_frame_examples(payload, cells):
    assert cells_per_frame(payload) == cells


def test_zero_payload_rejected():
    with pytest.raises(ValueError):
        cells_per_frame(0)


def test_rate_conversions():
    assert effective_rate_to_cell_rate(512, 64) == 2
    assert effective_rate_to_cell_rate(8 * 1518, 1518) == 32
    assert cell_rate_to_effective_rate(32, 1518) == 8 * 1518
    with pytest.raises(ValueError):
        effective_rate_to_cell_rate(0, 64)


def test_link_rate():
    r = LinkRate(155_520_000)
    assert r.cell_time == 2726  # 424e9 / 155.52e6 = 2726.3
    assert LinkRate(424_000_000).cell_time == 1000
    assert r.payload_capacity(40) == pytest.approx(155_520_000 * 40 / 53)
    with pytest.raises(ValueError):
        LinkRate(0)


def test_round_half_up():
    assert round_half_up(5, 2) == 3
    assert round_half_up(7, 2) == 4
    assert round_half_up(4, 3) == 1


@given(st.integers(1, 70000))
def test_segment_reassemble_round_trip(p):
    cells = segment_frame(p, vc_id=3, frame_id=9)
    assert len(cells) == cells_per_frame(p)
    assert cells[0].is_first and cells[-1].is_last
    assert sum(c.is_last for c in cells) == 1
    frame = reassemble(cells, ServiceClass.UBR)
    assert frame.payload_octets == p and frame.vc_id == 3 and frame.frame_id == 9


@given(st.integers(1, 1500))
def test_padding_boundary(k):
    # payload + trailer exactly filling k cells needs k cells; one more octet needs k + 1
    p = 48 * k - 8
    if p >= 1:
        assert cells_per_frame(p) == k
        assert cells_per_frame(p + 1) == k + 1


@given(st.integers(49, 20000), st.data())
def test_missing_cell_is_loss(p, data):
    cells = segment_frame(p)
    drop = data.draw(st.integers(0, len(cells) - 1))
    out = reassemble(cells[:drop] + cells[drop + 1:])
    assert isinstance(out, LossIndication)
    assert out.received_cells == len(cells) - 1


def test_duplicate_cell_is_corruption():
    cells = segment_frame(200)
    with pytest.raises(TraceCorruptionError):
        reassemble(cells + [cells[1]])


def test_empty_reassembly_rejected():
    with pytest.raises(ValueError):
        reassemble([])
