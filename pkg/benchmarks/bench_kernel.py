"""Time the compiled event kernel against the pure-Python fallback.

Both backends run the same k-to-1 overload scenario; the script checks the
traces are identical before reporting timings.
"""

from __future__ import annotations

import argparse
import logging
import statistics
import sys
import time

from cellbench.aal import LinkRate, ServiceClass
from cellbench.simulator import NetworkModel, SwitchModel, TrafficSpec, simulate
from cellbench.simulator import kernel
from cellbench.topology import build_k_to_1

log = logging.getLogger("bench_kernel")


def scenario(ports: int, duration: int, payload: int):
    rate = 155_520_000
    net = NetworkModel.single(SwitchModel.uniform(ports, rate, cell_latency=1000, buffer_cells=256))
    cfg = build_k_to_1(ports - 1, 0, ports)
    cap = LinkRate(rate).payload_capacity(payload)
    traffic = [TrafficSpec(vc.vc_id, ServiceClass.UBR, payload, cap, start_tick=7 * vc.vc_id, duration=duration)
               for vc in cfg.vcs]
    return net, cfg, traffic


def time_backend(backend: str, args) -> tuple[float, object]:
    net, cfg, traffic = scenario(args.ports, args.duration, args.payload)
    samples, trace = [], None
    for _ in range(args.repeat):
        t0 = time.perf_counter()
        trace = simulate(net, cfg, traffic, backend=backend)
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples), trace


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ports", type=int, default=8)
    ap.add_argument("--duration", type=int, default=20_000_000, help="traffic duration in ticks (ns)")
    ap.add_argument("--payload", type=int, default=1518)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    if kernel.compiled_run_events is None:
        log.error("compiled kernel not built; run: pip install -e . --no-build-isolation")
        return 1
    py_t, py_tr = time_backend("python", args)
    cy_t, cy_tr = time_backend("cython", args)
    if not py_tr.same_as(cy_tr):
        log.error("backends disagree")
        return 2
    cells = len(cy_tr)
    log.info("cells simulated: %d", cells)
    log.info("python  %8.3f s  %10.0f cells/s", py_t, cells / py_t)
    log.info("cython  %8.3f s  %10.0f cells/s", cy_t, cells / cy_t)
    log.info("speedup %8.1fx", py_t / cy_t)
    return 0


if __name__ == "__main__":
    sys.exit(main())
