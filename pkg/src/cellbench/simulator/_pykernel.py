"""Reference event loop (pure Python).  Must stay bit-identical to _ckernel.pyx."""

import heapq

import numpy as np

KIND_SHIFT = 62
PORT_SHIFT = 40


def run_events(copy_rank, copy_cls, copy_path_start, copy_path_len, copy_eligible,
               hops, port_ct, port_next_lat, port_next_prop, port_cap):
    """Drive every cell copy along its output-port path.

    Events are ordered by (time, kind, port, rank): arrivals (kind 0) before
    transmission starts (kind 1).  Returns ``(exit_last, drop_port)`` with -1
    for lost copies / delivered copies respectively.
    """
    n = len(copy_rank)
    n_ports = len(port_ct)
    rank = copy_rank.tolist()
    cls = copy_cls.tolist()
    pstart = copy_path_start.tolist()
    plen = copy_path_len.tolist()
    hop_port = hops.tolist()
    ct = port_ct.tolist()
    nlat = port_next_lat.tolist()
    nprop = port_next_prop.tolist()
    cap = port_cap.tolist()

    exit_last = [-1] * n
    drop_port = [-1] * n
    hop = [0] * n
    pending = [-1] * n_ports  # time of the port's next start event, -1 when idle
    queues = [([], []) for _ in range(n_ports)]  # (high, low) as list + head index
    heads = [[0, 0] for _ in range(n_ports)]

    heap = [
        (int(t), (hop_port[pstart[c]] << PORT_SHIFT) | rank[c], c)
        for c, t in enumerate(copy_eligible.tolist())
    ]
    heapq.heapify(heap)
    start_kind = 1 << KIND_SHIFT
    pop, push = heapq.heappop, heapq.heappush

    while heap:
        t, key, idx = pop(heap)
        if key >= start_kind:
            o = idx
            pending[o] = -1
            hi, lo = queues[o]
            h = heads[o]
            if h[0] < len(hi):
                c = hi[h[0]]
                h[0] += 1
            elif h[1] < len(lo):
                c = lo[h[1]]
                h[1] += 1
            else:
                continue
            fin = t + ct[o]
            k = hop[c]
            if k == plen[c] - 1:
                exit_last[c] = fin
            else:
                k += 1
                hop[c] = k
                nxt = hop_port[pstart[c] + k]
                push(heap, (fin + nprop[o] + nlat[o], (nxt << PORT_SHIFT) | rank[c], c))
            pending[o] = fin
            push(heap, (fin, start_kind | (o << PORT_SHIFT), o))
            # compact drained queue storage
            if h[0] > 4096 and h[0] * 2 > len(hi):
                del hi[:h[0]]
                h[0] = 0
            if h[1] > 4096 and h[1] * 2 > len(lo):
                del lo[:h[1]]
                h[1] = 0
        else:
            c = idx
            o = hop_port[pstart[c] + hop[c]]
            if pending[o] == -1:
                pending[o] = t
                push(heap, (t, start_kind | (o << PORT_SHIFT), o))
            hi, lo = queues[o]
            h = heads[o]
            occupancy = len(hi) - h[0] + len(lo) - h[1]
            limit = cap[o] + (1 if pending[o] == t else 0)
            if occupancy >= limit:
                drop_port[c] = o
                continue
            (hi if cls[c] == 0 else lo).append(c)

    return np.asarray(exit_last, dtype=np.int64), np.asarray(drop_port, dtype=np.int64)
