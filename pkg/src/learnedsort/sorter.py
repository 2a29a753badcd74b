"""Learned sort public API.

Pipeline: sample and train a CDF model, partition the input into ``f``
buckets through fixed-capacity fragments, defragment, re-partition every
non-homogeneous bucket into ``f`` sub-buckets the same way, sort each
non-homogeneous sub-bucket with a model-based counting sort and finish with
one insertion sort pass over the whole array.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .memory import AuxTracker, NULL_TRACKER
from .model import EcdfModel, _cdf, draw_sample, train_model
from .partition import (
    DefragWorkspace,
    FragmentPool,
    _defrag_strict,
    _partition_kernel,
    log_capacity,
)

SUPPORTED_DTYPES = (np.dtype(np.float64), np.dtype(np.uint64))


@dataclass(frozen=True)
class SortConfig:
    fanout: int = 1000
    fragment_capacity: int = 100
    sample_rate: float = 0.01
    leaf_count: int = 1000
    fallback_threshold: int = 5000
    seed: int = 0

    def __post_init__(self):
        if self.fanout < 2:
            raise ValueError("fanout must be >= 2")
        if self.fragment_capacity < 1:
            raise ValueError("fragment_capacity must be >= 1")
        if not 0.0 < self.sample_rate <= 1.0:
            raise ValueError("invalid sample rate")
        if self.leaf_count < 1:
            raise ValueError("leaf_count must be >= 1")
        if self.fallback_threshold < 0:
            raise ValueError("fallback_threshold must be >= 0")


@dataclass
class SortStats:
    trained: bool = False
    level0_skipped_homogeneous: int = 0
    sub_buckets_skipped_homogeneous: int = 0
    counting_sort_invocations: int = 0
    insertion_sort_displacement_max: int = 0
    max_sub_bucket: int = 0
    elapsed: dict[str, float] = field(default_factory=dict)
    total_elapsed: float = 0.0
    # (start, stop, value) of level-0 buckets skipped as homogeneous
    skipped_ranges: list[tuple[int, int, object]] = field(default_factory=list)
    # the same for sub-buckets of two or more keys, capped at SKIPPED_RANGE_LIMIT
    skipped_sub_ranges: list[tuple[int, int, object]] = field(default_factory=list)

    @property
    def buckets_skipped_homogeneous(self) -> int:
        """Homogeneity short-circuits at either level."""
        return self.level0_skipped_homogeneous + self.sub_buckets_skipped_homogeneous

    def counts(self) -> tuple[int, ...]:
        return (self.trained, self.level0_skipped_homogeneous,
                self.sub_buckets_skipped_homogeneous, self.counting_sort_invocations,
                self.insertion_sort_displacement_max, self.max_sub_bucket)


# -- kernels -----------------------------------------------------------------

@njit(cache=True, nogil=True)
def _has_nan(a):
    for k in range(a.shape[0]):
        if a[k] != a[k]:
            return True
    return False


@njit(cache=True, nogil=True, inline="always")
def _is_homogeneous(a, start, n):
    if n <= 1:
        return True
    first = a[start]
    for k in range(start + 1, start + n):
        if a[k] != first:
            return False
    return True


@njit(cache=True, nogil=True, inline="always")
def _counting_sort(a, start, n, root_slope, root_intercept, leaves, adj, total_n, tmp, hist,
                   pos):
    last = n - 1
    for k in range(n):
        hist[k] = 0
    for k in range(n):
        v = (_cdf(a[start + k], root_slope, root_intercept, leaves) - adj) * total_n
        if v <= 0.0:
            p = 0
        elif v >= last:
            p = last
        else:
            p = int(v)
        pos[k] = p
        hist[p] += 1
    for k in range(1, n):
        hist[k] += hist[k - 1]
    for k in range(n):
        p = pos[k]
        hist[p] -= 1
        tmp[hist[p]] = a[start + k]
    for k in range(n):
        a[start + k] = tmp[k]


@njit(cache=True, nogil=True)
def _insertion_sort(a):
    worst = 0
    for k in range(1, a.shape[0]):
        x = a[k]
        j = k - 1
        if a[j] <= x:
            continue
        while j >= 0 and a[j] > x:
            a[j + 1] = a[j]
            j -= 1
        if k - j - 1 > worst:
            worst = k - j - 1
        a[j + 1] = x
    return worst


DONE = 0
NEED_SCRATCH = 1

# counters layout
C_SKIP0, C_SKIP1, C_COUNTING, C_MAXSUB, C_RANGES = range(5)

# at most this many skipped sub-bucket ranges are kept for inspection
SKIPPED_RANGE_LIMIT = 4096


@njit(cache=True, nogil=True)
def _refine(a, offsets, sizes, first_bucket, resumed, root_slope, root_intercept, leaves,
            fanout, pool, fill, sub_sizes, sub_homog, log_b, log_s, spare, dest, src,
            cursor, tmp, hist, pos, skipped0, sub_ranges, counters, total_n):
    """Second partitioning level plus counting sort, from ``first_bucket`` on.

    Returns (NEED_SCRATCH, bucket, size) when the counting-sort scratch is too
    small for a sub-bucket of ``bucket``; the caller grows it and resumes with
    ``resumed=True`` (the bucket's sub-partition is kept in ``sub_*``).
    """
    cap = pool.shape[1]
    ff = np.float64(fanout) * fanout
    scratch = pool.reshape(-1)
    for i in range(first_bucket, fanout):
        n = sizes[i]
        if n == 0:
            continue
        s = offsets[i]
        if not (resumed and i == first_bucket):
            if _is_homogeneous(a, s, n):
                skipped0[i] = 1
                counters[C_SKIP0] += 1
                continue
            n_log = _partition_kernel(a, s, n, root_slope, root_intercept, leaves, 1, i,
                                      fanout, pool, fill, sub_sizes, log_b, log_s)
            _defrag_strict(a, s, n, sub_sizes, log_b, log_s, n_log, cap, fanout,
                           spare, scratch, dest, src, cursor)
            need = 0
            r = s
            for j in range(fanout):
                m = sub_sizes[j]
                h = _is_homogeneous(a, r, m)
                sub_homog[j] = 1 if h else 0
                if not h and m > need:
                    need = m
                r += m
            if need > counters[C_MAXSUB]:
                counters[C_MAXSUB] = need
            if need > tmp.shape[0]:
                return NEED_SCRATCH, i, need
        r = s
        for j in range(fanout):
            m = sub_sizes[j]
            if m > 0:
                if sub_homog[j]:
                    counters[C_SKIP1] += 1
                    q = counters[C_RANGES]
                    if m > 1 and q < sub_ranges.shape[0]:
                        sub_ranges[q, 0] = r
                        sub_ranges[q, 1] = m
                        counters[C_RANGES] = q + 1
                else:
                    adj = (i * fanout + j) / ff
                    _counting_sort(a, r, m, root_slope, root_intercept, leaves, adj,
                                   total_n, tmp, hist, pos)
                    counters[C_COUNTING] += 1
            r += m
    return DONE, fanout, 0


# -- public operations --------------------------------------------------------

def is_homogeneous(keys, start: int = 0, stop: int | None = None) -> bool:
    keys = np.asarray(keys)
    stop = len(keys) if stop is None else stop
    if stop - start <= 1:
        return True
    return bool(_is_homogeneous(keys, start, stop - start))


def counting_sort_bucket(keys: np.ndarray, model: EcdfModel, i: int, j: int, fanout: int,
                         total_n: int, start: int = 0, stop: int | None = None,
                         scratch: np.ndarray | None = None,
                         counters: np.ndarray | None = None) -> None:
    """Model-based counting sort of one sub-bucket ``keys[start:stop]``.

    Positions are ``(cdf(x) - (i*f + j)/f**2) * total_n`` clamped into the
    sub-bucket, so the result is always a permutation; keys whose predictions
    collide are left for the final insertion pass.
    """
    stop = len(keys) if stop is None else stop
    n = stop - start
    if n < 2:
        return
    tmp = np.empty(n, dtype=keys.dtype) if scratch is None else scratch
    hist = np.empty(2 * n, dtype=np.int64) if counters is None else counters
    if tmp.shape[0] < n or hist.shape[0] < 2 * n:
        raise ValueError("scratch too small for sub-bucket")
    adj = (i * fanout + j) / (float(fanout) * fanout)
    _counting_sort(keys, start, n, model.root_slope, model.root_intercept, model.leaves,
                   adj, float(total_n), tmp, hist[:n], hist[n:2 * n])


def insertion_sort_cleanup(keys: np.ndarray) -> int:
    """Sort ``keys`` in place; returns the largest leftward move of any key."""
    if len(keys) < 2:
        return 0
    return int(_insertion_sort(keys))


def _check_keys(keys) -> np.ndarray:
    if not isinstance(keys, np.ndarray) or keys.ndim != 1:
        raise TypeError("keys must be a one-dimensional numpy array")
    if keys.dtype not in SUPPORTED_DTYPES:
        raise TypeError(f"unsupported key type {keys.dtype}; use float64 or uint64")
    if not keys.flags.writeable:
        raise ValueError("keys must be writeable")
    if keys.dtype.kind == "f" and _has_nan(keys):
        raise ValueError("unordered key")
    return keys


def learned_sort(keys: np.ndarray, config: SortConfig | None = None, *,
                 model: EcdfModel | None = None,
                 tracker: AuxTracker | None = None) -> SortStats:
    """Sort a float64 or uint64 array in place.

    ``model`` replaces the trained model (used for fault injection);
    ``tracker`` records every auxiliary buffer the sort allocates.
    """
    config = config or SortConfig()
    tracker = tracker or NULL_TRACKER
    t_start = time.perf_counter()
    keys = _check_keys(keys)
    stats = SortStats()
    n = keys.shape[0]
    if n <= 1:
        return stats
    if model is None and n <= config.fallback_threshold:
        t0 = time.perf_counter()
        keys.sort()
        stats.elapsed["fallback"] = time.perf_counter() - t0
        stats.total_elapsed = time.perf_counter() - t_start
        return stats

    f, c = config.fanout, config.fragment_capacity
    clock = time.perf_counter()

    def lap(name):
        nonlocal clock
        now = time.perf_counter()
        stats.elapsed[name] = stats.elapsed.get(name, 0.0) + now - clock
        clock = now

    if model is None:
        sample = draw_sample(keys, config.sample_rate, config.seed)
        tracker.adopt("training", sample.keys)
        lap("sample")
        model = train_model(sample, config.leaf_count)
        tracker.free(sample.keys)
        del sample
        stats.trained = True
        lap("train")
    rs, ri, leaves = model.root_slope, model.root_intercept, model.leaves

    pool = FragmentPool(f, c, keys.dtype, tracker)
    work = DefragWorkspace(pool, n, tracker)
    n_desc = log_capacity(n, c, f)
    log_b = tracker.alloc("descriptors", n_desc, np.int64)
    log_s = tracker.alloc("descriptors", n_desc, np.int64)
    sizes = tracker.alloc("counters", f, np.int64)
    sub_sizes = tracker.alloc("counters", f, np.int64)
    sub_homog = tracker.alloc("counters", f, np.int8)
    skipped0 = tracker.alloc("counters", f, np.int8)
    skipped0[:] = 0
    counters = np.zeros(5, dtype=np.int64)
    sub_ranges = tracker.alloc("counters", (SKIPPED_RANGE_LIMIT, 2), np.int64)

    n_log = _partition_kernel(keys, 0, n, rs, ri, leaves, 0, 0, f, pool.buffer, pool.fill,
                              sizes, log_b, log_s)
    _defrag_strict(keys, 0, n, sizes, log_b, log_s, n_log, c, f, work.spare,
                   work.scratch, work.dest, work.src, work.cursor)
    offsets = np.zeros(f, dtype=np.int64)
    np.cumsum(sizes[:-1], out=offsets[1:])
    lap("partition")

    tmp = tracker.alloc("keys", 0, keys.dtype)
    hist = tracker.alloc("counters", 0, np.int64)
    pos = tracker.alloc("counters", 0, np.int64)
    first, resumed = 0, False
    while True:
        status, bucket, need = _refine(
            keys, offsets, sizes, first, resumed, rs, ri, leaves, f, pool.buffer,
            pool.fill, sub_sizes, sub_homog, log_b, log_s, work.spare, work.dest,
            work.src, work.cursor, tmp, hist, pos, skipped0, sub_ranges, counters,
            float(n))
        if status == DONE:
            break
        tracker.free(tmp)
        tracker.free(hist)
        tracker.free(pos)
        tmp = tracker.alloc("keys", need, keys.dtype)
        hist = tracker.alloc("counters", need + 1, np.int64)
        pos = tracker.alloc("counters", need, np.int64)
        first, resumed = bucket, True
    for i in np.flatnonzero(skipped0):
        s = int(offsets[i])
        stats.skipped_ranges.append((s, s + int(sizes[i]), keys[s].item()))
    for s, m in sub_ranges[:counters[C_RANGES]].tolist():
        stats.skipped_sub_ranges.append((s, s + m, keys[s].item()))
    lap("refine")

    stats.insertion_sort_displacement_max = insertion_sort_cleanup(keys)
    lap("insertion")

    stats.level0_skipped_homogeneous = int(counters[C_SKIP0])
    stats.sub_buckets_skipped_homogeneous = int(counters[C_SKIP1])
    stats.counting_sort_invocations = int(counters[C_COUNTING])
    stats.max_sub_bucket = int(counters[C_MAXSUB])

    for arr in (pool.buffer, pool.fill, work.spare, work.dest, work.src, work.cursor,
                log_b, log_s, sizes, sub_sizes, sub_homog, skipped0, sub_ranges,
                tmp, hist, pos):
        tracker.free(arr)
    stats.total_elapsed = time.perf_counter() - t_start
    return stats


def learned_sort_f64(keys: np.ndarray, config: SortConfig | None = None) -> SortStats:
    if keys.dtype != np.float64:
        raise TypeError("expected float64 keys")
    return learned_sort(keys, config)


def learned_sort_u64(keys: np.ndarray, config: SortConfig | None = None) -> SortStats:
    if keys.dtype != np.uint64:
        raise TypeError("expected uint64 keys")
    return learned_sort(keys, config)
