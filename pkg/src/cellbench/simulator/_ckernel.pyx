# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event loop.  Semantics mirror _pykernel.run_events exactly."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t

cnp.import_array()

cdef int64_t KIND_START = (<int64_t>1) << 62
cdef int PORT_SHIFT = 40


cdef inline bint _less(int64_t* ht, int64_t* hk, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    if ht[a] != ht[b]:
        return ht[a] < ht[b]
    return hk[a] < hk[b]


cdef inline void _swap(int64_t* ht, int64_t* hk, int64_t* hi, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef int64_t x
    x = ht[a]; ht[a] = ht[b]; ht[b] = x
    x = hk[a]; hk[a] = hk[b]; hk[b] = x
    x = hi[a]; hi[a] = hi[b]; hi[b] = x


cdef inline void _sift_down(int64_t* ht, int64_t* hk, int64_t* hi, Py_ssize_t n, Py_ssize_t pos) noexcept nogil:
    cdef Py_ssize_t child
    while True:
        child = 2 * pos + 1
        if child >= n:
            break
        if child + 1 < n and _less(ht, hk, child + 1, child):
            child += 1
        if _less(ht, hk, child, pos):
            _swap(ht, hk, hi, child, pos)
            pos = child
        else:
            break


cdef inline void _sift_up(int64_t* ht, int64_t* hk, int64_t* hi, Py_ssize_t pos) noexcept nogil:
    cdef Py_ssize_t parent
    while pos > 0:
        parent = (pos - 1) >> 1
        if _less(ht, hk, pos, parent):
            _swap(ht, hk, hi, pos, parent)
            pos = parent
        else:
            break


def run_events(cnp.int64_t[::1] copy_rank, cnp.int8_t[::1] copy_cls,
               cnp.int64_t[::1] copy_path_start, cnp.int64_t[::1] copy_path_len,
               cnp.int64_t[::1] copy_eligible, cnp.int64_t[::1] hops,
               cnp.int64_t[::1] port_ct, cnp.int64_t[::1] port_next_lat,
               cnp.int64_t[::1] port_next_prop, cnp.int64_t[::1] port_cap):
    cdef Py_ssize_t n = copy_rank.shape[0]
    cdef Py_ssize_t n_ports = port_ct.shape[0]
    cdef Py_ssize_t i, c, o, k, nxt, size, cap_total
    cdef int64_t t, key, idx, fin, limit, occ

    exit_np = np.full(n, -1, dtype=np.int64)
    drop_np = np.full(n, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] exit_last = exit_np
    cdef cnp.int64_t[::1] drop_port = drop_np
    cdef cnp.int64_t[::1] hop = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] pending = np.full(n_ports, -1, dtype=np.int64)

    # Per port and class ring buffers, sized by the copies that can ever wait there.
    load_np = np.zeros(n_ports, dtype=np.int64)
    cdef cnp.int64_t[::1] load = load_np
    for c in range(n):
        for k in range(copy_path_len[c]):
            load[hops[copy_path_start[c] + k]] += 1
    ring_np = np.minimum(np.asarray(port_cap) + 1, load_np)
    ring_np = np.maximum(ring_np, 1)
    cdef cnp.int64_t[::1] ring = ring_np
    cdef cnp.int64_t[::1] qoff = np.zeros(2 * n_ports, dtype=np.int64)
    cdef cnp.int64_t[::1] qhead = np.zeros(2 * n_ports, dtype=np.int64)
    cdef cnp.int64_t[::1] qlen = np.zeros(2 * n_ports, dtype=np.int64)
    cap_total = 0
    for o in range(n_ports):
        qoff[2 * o] = cap_total
        cap_total += ring[o]
        qoff[2 * o + 1] = cap_total
        cap_total += ring[o]
    cdef cnp.int64_t[::1] qbuf = np.zeros(max(cap_total, 1), dtype=np.int64)

    cdef Py_ssize_t heap_cap = n + n_ports + 1
    cdef cnp.int64_t[::1] ht = np.empty(heap_cap, dtype=np.int64)
    cdef cnp.int64_t[::1] hk = np.empty(heap_cap, dtype=np.int64)
    cdef cnp.int64_t[::1] hi = np.empty(heap_cap, dtype=np.int64)
    cdef Py_ssize_t hn = 0
    cdef int64_t* pt = &ht[0]
    cdef int64_t* pk = &hk[0]
    cdef int64_t* pi = &hi[0]

    with nogil:
        for c in range(n):
            ht[hn] = copy_eligible[c]
            hk[hn] = (hops[copy_path_start[c]] << PORT_SHIFT) | copy_rank[c]
            hi[hn] = c
            hn += 1
        i = hn // 2 - 1
        while i >= 0:
            _sift_down(pt, pk, pi, hn, i)
            i -= 1

        while hn > 0:
            t = ht[0]; key = hk[0]; idx = hi[0]
            hn -= 1
            if hn > 0:
                ht[0] = ht[hn]; hk[0] = hk[hn]; hi[0] = hi[hn]
                _sift_down(pt, pk, pi, hn, 0)

            if key >= KIND_START:
                o = idx
                pending[o] = -1
                if qlen[2 * o] > 0:
                    k = 2 * o
                elif qlen[2 * o + 1] > 0:
                    k = 2 * o + 1
                else:
                    continue
                c = qbuf[qoff[k] + qhead[k]]
                qhead[k] += 1
                if qhead[k] == ring[o]:
                    qhead[k] = 0
                qlen[k] -= 1

                fin = t + port_ct[o]
                if hop[c] == copy_path_len[c] - 1:
                    exit_last[c] = fin
                else:
                    hop[c] += 1
                    nxt = hops[copy_path_start[c] + hop[c]]
                    ht[hn] = fin + port_next_prop[o] + port_next_lat[o]
                    hk[hn] = (nxt << PORT_SHIFT) | copy_rank[c]
                    hi[hn] = c
                    hn += 1
                    _sift_up(pt, pk, pi, hn - 1)
                pending[o] = fin
                ht[hn] = fin
                hk[hn] = KIND_START | (o << PORT_SHIFT)
                hi[hn] = o
                hn += 1
                _sift_up(pt, pk, pi, hn - 1)
            else:
                c = idx
                o = hops[copy_path_start[c] + hop[c]]
                if pending[o] == -1:
                    pending[o] = t
                    ht[hn] = t
                    hk[hn] = KIND_START | (o << PORT_SHIFT)
                    hi[hn] = o
                    hn += 1
                    _sift_up(pt, pk, pi, hn - 1)
                occ = qlen[2 * o] + qlen[2 * o + 1]
                limit = port_cap[o]
                if pending[o] == t:
                    limit += 1
                if occ >= limit:
                    drop_port[c] = o
                    continue
                k = 2 * o + (0 if copy_cls[c] == 0 else 1)
                size = qhead[k] + qlen[k]
                if size >= ring[o]:
                    size -= ring[o]
                qbuf[qoff[k] + size] = c
                qlen[k] += 1

    return exit_np, drop_np
