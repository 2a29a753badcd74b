"""Fragmented in-place partitioning and defragmentation.

A pass streams the keys of a range into ``f`` fixed-capacity fragments, one
per bucket.  Whenever a fragment fills up it is written back over the
already-consumed prefix of the range and its (bucket, size) descriptor is
logged.  After the scan the partial fragments are flushed in bucket order.
Buckets therefore never overflow and no spill area exists; the price is that
a bucket's fragments end up scattered, which :func:`defragment` repairs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .memory import AuxTracker, NULL_TRACKER
from .model import EcdfModel, _cdf


class FragmentDescriptor(NamedTuple):
    bucket_id: int
    size: int


class FragmentPool:
    """``fanout`` fragments of ``capacity`` keys each, reusable across passes."""

    def __init__(self, fanout: int, capacity: int, dtype=np.float64,
                 tracker: AuxTracker = NULL_TRACKER):
        if fanout < 1 or capacity < 1:
            raise ValueError("fanout and capacity must be positive")
        self.fanout = fanout
        self.capacity = capacity
        self.buffer = tracker.alloc("keys", (fanout, capacity), dtype)
        self.fill = tracker.alloc("counters", fanout, np.int64)
        self.fill[:] = 0

    @property
    def key_storage(self) -> int:
        return self.buffer.size

    def is_empty(self) -> bool:
        return not self.fill.any()


@dataclass
class PartitionResult:
    bucket_sizes: np.ndarray
    log_buckets: np.ndarray
    log_sizes: np.ndarray

    @property
    def fanout(self) -> int:
        return self.bucket_sizes.shape[0]

    @property
    def fragment_log(self) -> list[FragmentDescriptor]:
        return [FragmentDescriptor(int(b), int(s))
                for b, s in zip(self.log_buckets, self.log_sizes)]

    def offsets(self) -> np.ndarray:
        starts = np.zeros(self.fanout, dtype=np.int64)
        np.cumsum(self.bucket_sizes[:-1], out=starts[1:])
        return starts


def log_capacity(n: int, capacity: int, fanout: int) -> int:
    """Upper bound on descriptors produced by one pass over ``n`` keys."""
    return n // capacity + fanout


@njit(cache=True, nogil=True)
def _partition_kernel(a, start, n, root_slope, root_intercept, leaves, level, parent,
                      fanout, pool, fill, sizes, log_b, log_s):
    cap = pool.shape[1]
    w = start
    n_log = 0
    if level == 0:
        for k in range(start, start + n):
            x = a[k]
            b = int(_cdf(x, root_slope, root_intercept, leaves) * fanout)
            s = fill[b]
            pool[b, s] = x
            s += 1
            if s == cap:
                # w <= k: everything below the write head has been consumed
                for t in range(cap):
                    a[w + t] = pool[b, t]
                w += cap
                log_b[n_log] = b
                n_log += 1
                s = 0
            fill[b] = s
    else:
        ff = np.float64(fanout) * fanout
        base = parent * fanout
        top = fanout - 1
        for k in range(start, start + n):
            x = a[k]
            b = int(_cdf(x, root_slope, root_intercept, leaves) * ff) - base
            if b < 0:
                b = 0
            elif b > top:
                b = top
            s = fill[b]
            pool[b, s] = x
            s += 1
            if s == cap:
                for t in range(cap):
                    a[w + t] = pool[b, t]
                w += cap
                log_b[n_log] = b
                n_log += 1
                s = 0
            fill[b] = s
    for b in range(fanout):
        sizes[b] = 0
    for e in range(n_log):
        log_s[e] = cap
        sizes[log_b[e]] += cap
    for b in range(fanout):
        s = fill[b]
        if s > 0:
            for t in range(s):
                a[w + t] = pool[b, t]
            w += s
            log_b[n_log] = b
            log_s[n_log] = s
            n_log += 1
            sizes[b] += s
            fill[b] = 0
    return n_log


def partition_pass(keys: np.ndarray, model: EcdfModel, level: int, parent: int,
                   fanout: int, capacity: int, pool: FragmentPool | None = None,
                   start: int = 0, stop: int | None = None) -> PartitionResult:
    """Partition ``keys[start:stop]`` in place into ``fanout`` buckets."""
    stop = len(keys) if stop is None else stop
    n = stop - start
    if n < 1:
        raise ValueError("range must hold at least one key")
    if level not in (0, 1):
        raise ValueError("level must be 0 or 1")
    if level == 1 and not 0 <= parent < fanout:
        raise ValueError("parent bucket out of range")
    if pool is None:
        pool = FragmentPool(fanout, capacity, keys.dtype)
    if pool.fanout < fanout or pool.capacity != capacity or pool.buffer.dtype != keys.dtype:
        raise ValueError("fragment pool does not match fanout/capacity/dtype")
    if not pool.is_empty():
        raise ValueError("fragment pool is not empty")
    sizes = np.zeros(fanout, dtype=np.int64)
    cap = log_capacity(n, capacity, fanout)
    log_b = np.empty(cap, dtype=np.int64)
    log_s = np.empty(cap, dtype=np.int64)
    n_log = _partition_kernel(keys, start, n, model.root_slope, model.root_intercept,
                              model.leaves, level, parent, fanout,
                              pool.buffer[:fanout], pool.fill, sizes, log_b, log_s)
    return PartitionResult(sizes, log_b[:n_log], log_s[:n_log])


# -- defragmentation ---------------------------------------------------------

CORRUPT = -1


@njit(cache=True, nogil=True)
def _check_log(n, sizes, log_b, log_s, n_log, cap, fanout, seen):
    """Number of leading full fragments, or CORRUPT."""
    total = 0
    for b in range(fanout):
        if sizes[b] < 0:
            return CORRUPT
        total += sizes[b]
    if total != n:
        return CORRUPT
    n_full = 0
    while n_full < n_log and log_s[n_full] == cap:
        n_full += 1
    for b in range(fanout):
        seen[b] = 0
    prev = -1
    for e in range(n_log):
        b = log_b[e]
        s = log_s[e]
        if b < 0 or b >= fanout or s < 1 or s > cap:
            return CORRUPT
        if e >= n_full:
            if s == cap or b <= prev:
                return CORRUPT
            prev = b
        seen[b] += s
    for b in range(fanout):
        if seen[b] != sizes[b]:
            return CORRUPT
    return n_full


@njit(cache=True, nogil=True)
def _defrag_strict(a, start, n, sizes, log_b, log_s, n_log, cap, fanout,
                   spare, scratch, dest, src, cursor):
    n_full = _check_log(n, sizes, log_b, log_s, n_log, cap, fanout, cursor)
    if n_full < 0:
        return CORRUPT
    # 1. stable permutation of full fragments into bucket order, one spare buffer
    for b in range(fanout):
        cursor[b] = 0
    for e in range(n_full):
        cursor[log_b[e]] += 1
    acc = 0
    for b in range(fanout):
        c_b = cursor[b]
        cursor[b] = acc
        acc += c_b
    for e in range(n_full):
        b = log_b[e]
        dest[e] = cursor[b]
        cursor[b] += 1
    for e in range(n_full):
        src[dest[e]] = e
    for s in range(n_full):
        if src[s] < 0:
            continue
        if src[s] == s:
            src[s] = -1
            continue
        off = start + s * cap
        for t in range(cap):
            spare[t] = a[off + t]
        cur = s
        while True:
            nxt = src[cur]
            src[cur] = -1
            dst = start + cur * cap
            if nxt == s:
                for t in range(cap):
                    a[dst + t] = spare[t]
                break
            so = start + nxt * cap
            for t in range(cap):
                a[dst + t] = a[so + t]
            cur = nxt
    # 2. park partial fragments, shift full runs right, drop partials in
    w_full = start + n_full * cap
    n_part = start + n - w_full
    for t in range(n_part):
        scratch[t] = a[w_full + t]
    # per-bucket partial offset in scratch (-1: none)
    for b in range(fanout):
        cursor[b] = -1
    off = 0
    for e in range(n_full, n_log):
        cursor[log_b[e]] = off
        off += log_s[e]
    end = start + n
    full_end = w_full
    for b in range(fanout - 1, -1, -1):
        size_b = sizes[b]
        if size_b == 0:
            continue
        p_off = cursor[b]
        # a partial fragment holds fewer than cap keys
        part = size_b % cap if p_off >= 0 else 0
        full_len = size_b - part
        b_start = end - size_b
        src_start = full_end - full_len
        if b_start != src_start:
            for t in range(full_len - 1, -1, -1):
                a[b_start + t] = a[src_start + t]
        for t in range(part):
            a[b_start + full_len + t] = scratch[p_off + t]
        end = b_start
        full_end = src_start
    return n_full


@njit(cache=True, nogil=True)
def _defrag_reference(a, start, n, sizes, log_b, log_s, n_log, cap, fanout, out, cursor):
    if _check_log(n, sizes, log_b, log_s, n_log, cap, fanout, cursor) < 0:
        return CORRUPT
    acc = 0
    for b in range(fanout):
        cursor[b] = acc
        acc += sizes[b]
    pos = start
    for e in range(n_log):
        b = log_b[e]
        s = log_s[e]
        d = cursor[b]
        for t in range(s):
            out[d + t] = a[pos + t]
        cursor[b] += s
        pos += s
    for t in range(n):
        a[start + t] = out[t]
    return 0


class DefragWorkspace:
    """Reusable buffers for strict defragmentation of ranges up to ``max_n`` keys.

    Key storage: one spare fragment (``capacity`` keys) plus the fragment pool
    buffer, which is empty after a pass and parks the partial fragments.
    """

    def __init__(self, pool: FragmentPool, max_n: int, tracker: AuxTracker = NULL_TRACKER):
        self.pool = pool
        cap = log_capacity(max_n, pool.capacity, pool.fanout)
        self.spare = tracker.alloc("keys", pool.capacity, pool.buffer.dtype)
        self.dest = tracker.alloc("descriptors", cap, np.int64)
        self.src = tracker.alloc("descriptors", cap, np.int64)
        self.cursor = tracker.alloc("counters", pool.fanout, np.int64)

    @property
    def scratch(self) -> np.ndarray:
        return self.pool.buffer.reshape(-1)


def defragment(keys: np.ndarray, result: PartitionResult, scratch=None,
               mode: str = "strict", start: int = 0, capacity: int | None = None,
               workspace: DefragWorkspace | None = None) -> np.ndarray:
    """Make every bucket of ``result`` contiguous in ``keys[start:]``.

    Returns the bucket start offsets relative to ``start``.  ``strict`` needs
    auxiliary key storage of ``f * c + c``; ``reference`` gathers through an
    ``n``-sized copy and serves as the differential oracle.
    """
    sizes = np.asarray(result.bucket_sizes, dtype=np.int64)
    fanout = sizes.shape[0]
    n = int(sizes.sum())
    log_b = np.asarray(result.log_buckets, dtype=np.int64)
    log_s = np.asarray(result.log_sizes, dtype=np.int64)
    if capacity is None:
        capacity = int(log_s.max()) if log_s.size else 1
        if workspace is not None:
            capacity = workspace.pool.capacity
    if start + n > len(keys) or log_s.sum() != n:
        raise ValueError("corrupt partition state")
    if mode == "strict":
        if workspace is None:
            pool = FragmentPool(fanout, capacity, keys.dtype)
            workspace = DefragWorkspace(pool, n)
        scratch = workspace.scratch if scratch is None else scratch
        if scratch.shape[0] < fanout * (capacity - 1):
            raise ValueError("scratch must hold f * c keys")
        rc = _defrag_strict(keys, start, n, sizes, log_b, log_s, log_b.shape[0], capacity,
                            fanout, workspace.spare, scratch, workspace.dest, workspace.src,
                            workspace.cursor)
    elif mode == "reference":
        out = np.empty(n, dtype=keys.dtype)
        cursor = np.empty(fanout, dtype=np.int64)
        rc = _defrag_reference(keys, start, n, sizes, log_b, log_s, log_b.shape[0],
                               capacity, fanout, out, cursor)
    else:
        raise ValueError(f"unknown defragment mode {mode!r}")
    if rc < 0:
        raise ValueError("corrupt partition state")
    return result.offsets()
