from fractions import Fraction

import pytest

from cellbench.topology import (
    ConfigKind,
    build_config,
    build_full_cross,
    build_k_to_1,
    build_latency_background,
    build_loopback_throughput,
    build_multicast,
    build_partial_cross,
    build_straight,
    max_background_lossless_rate,
    max_min_allocation,
)

from maxmin_oracle import CORPUS, is_max_min, oracle_max_min


def edges(cfg):
    return sorted((vc.input_port, vc.output_ports) for vc in cfg.vcs)


@pytest.mark.parametrize("n", [2, 3, 8, 16])
def test_cardinalities(n):
    assert len(build_straight(n).vcs) == n
    assert len(build_full_cross(n).vcs) == n * (n - 1)
    for m in range(1, n):
        assert len(build_partial_cross(n, m).vcs) == n * m
    mc = build_multicast(n)
    assert len(mc.vcs) == 1 and len(mc.vcs[0].output_ports) == n - 1


@pytest.mark.parametrize("n", [3, 5, 8])
def test_partial_cross_limits(n):
    assert edges(build_partial_cross(n, 1)) == edges(build_straight(n))
    assert edges(build_partial_cross(n, n - 1)) == edges(build_full_cross(n))


def test_straight_ports_used_once():
    cfg = build_straight(6)
    assert sorted(vc.input_port for vc in cfg.vcs) == list(range(6))
    assert sorted(vc.output_ports[0] for vc in cfg.vcs) == list(range(6))


def test_k_to_1():
    cfg = build_k_to_1(3, 0, 8)
    assert len(cfg.vcs) == 3
    assert all(vc.output_ports == (0,) for vc in cfg.vcs)
    with pytest.raises(ValueError):
        build_k_to_1(8, 0, 8)
    with pytest.raises(ValueError):
        build_k_to_1(1, 0, 8)


def test_build_config_dispatch():
    assert build_config("partial_cross", 8, m=2).kind is ConfigKind.PARTIAL_CROSS
    with pytest.raises(ValueError):
        build_config("partial_cross", 8, m=8)


def _chain_ok(cfg, monitor=0):
    for chain in cfg.chains:
        vcs = [cfg.vc(v) for v in chain]
        assert vcs[0].input_port == monitor and vcs[-1].output_ports == (monitor,)
        for a, b in zip(vcs, vcs[1:]):
            assert a.output_ports[0] == b.input_port


@pytest.mark.parametrize("n, m, expected", [(8, 2, 16), (2, 1, 2), (8, 7, 56), (4, 1, 4)])
def test_loopback_throughput(n, m, expected):
    cfg, loop = build_loopback_throughput(n, m)
    assert len(cfg.vcs) == expected
    assert 0 not in loop and len(loop) == n - 1
    _chain_ok(cfg)
    # each port's input and output carry m emulated VCs
    for p in range(n):
        assert sum(vc.input_port == p for vc in cfg.vcs) == m
        assert sum(vc.output_ports[0] == p for vc in cfg.vcs) == m


def test_loopback_crosses_modules():
    module = (0, 0, 0, 0, 1, 1, 1, 1)
    cfg, _ = build_loopback_throughput(8, 2, module_map=module)
    assert all(module[vc.input_port] != module[vc.output_ports[0]] for vc in cfg.vcs)


@pytest.mark.parametrize("w, kind, m, expected", [
    (8, "straight", None, 7), (3, "straight", None, 2), (8, "full_cross", None, 42),
    (8, "partial_cross", 2, 14), (8, "multicast", None, 1),
])
def test_latency_background(w, kind, m, expected):
    fg, cfg, budget = build_latency_background(w, kind, m=m, link_rates=[10] * w)
    assert len(cfg.vcs) == expected
    for vc in cfg.vcs:
        assert vc.input_port != fg.input_port
        assert fg.output_ports[0] not in vc.output_ports
    assert budget.ffl == 10 and budget.mbl == 10 * (w - 1)


def test_latency_background_rejects_small_or_k_to_1():
    with pytest.raises(ValueError):
        build_latency_background(2, "straight")
    with pytest.raises(ValueError):
        build_latency_background(8, "k_to_1")


def test_max_background_lossless_rate():
    assert max_background_lossless_rate([100, 100, 50], 3) == 100
    assert max_background_lossless_rate([100] * 4, 4) == 300


def test_max_min_example():
    assert max_min_allocation([2, 4, 10], [9], [[0], [0], [0]]) == [2, Fraction(7, 2), Fraction(7, 2)]


def test_max_min_unlimited_and_errors():
    assert max_min_allocation([None, None], [10, 4], [[0], [0, 1]]) == [6, 4]
    with pytest.raises(ValueError):
        max_min_allocation([1], [0], [[0]])
    with pytest.raises(ValueError):
        max_min_allocation([1], [1], [[0]], policy="proportional")


@pytest.mark.parametrize("case", range(len(CORPUS)))
def test_max_min_corpus(case):
    demands, caps, routes = CORPUS[case]
    got = max_min_allocation(demands, caps, routes)
    assert got == oracle_max_min(demands, caps, routes)
    assert is_max_min(got, demands, caps, routes)
