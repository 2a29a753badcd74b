"""Reference sorters the benchmark compares against."""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _radix_passes(a, buf):
    n = a.shape[0]
    counts = np.zeros(256, dtype=np.int64)
    src, dst = a, buf
    for shift in range(0, 64, 8):
        counts[:] = 0
        for k in range(n):
            counts[(src[k] >> np.uint64(shift)) & np.uint64(0xFF)] += 1
        if counts.max() == n:
            continue
        total = 0
        for d in range(256):
            c = counts[d]
            counts[d] = total
            total += c
        for k in range(n):
            x = src[k]
            d = (x >> np.uint64(shift)) & np.uint64(0xFF)
            dst[counts[d]] = x
            counts[d] += 1
        src, dst = dst, src
    return src


@njit(cache=True, nogil=True)
def _float_to_ordered(u):
    sign = np.uint64(1) << np.uint64(63)
    for k in range(u.shape[0]):
        x = u[k]
        u[k] = ~x if x & sign else x | sign


@njit(cache=True, nogil=True)
def _ordered_to_float(u):
    sign = np.uint64(1) << np.uint64(63)
    for k in range(u.shape[0]):
        x = u[k]
        u[k] = x ^ sign if x & sign else ~x


def lsd_radix_sort(keys: np.ndarray) -> None:
    """In-place LSD radix sort (8-bit digits) of float64 or uint64 keys.

    Floats are mapped to unsigned integers whose order matches the float
    order (flip all bits of negatives, set the sign bit of positives).
    Uses an ``n``-key ping-pong buffer.
    """
    if keys.dtype == np.float64:
        u = keys.view(np.uint64)
        _float_to_ordered(u)
    elif keys.dtype == np.uint64:
        u = keys
    else:
        raise TypeError(f"unsupported key type {keys.dtype}")
    if u.shape[0] > 1:
        buf = np.empty_like(u)
        out = _radix_passes(u, buf)
        if out is not u and not np.shares_memory(out, u):
            u[:] = out
    if keys.dtype == np.float64:
        _ordered_to_float(u)


def std_sort(keys: np.ndarray) -> None:
    """The platform's standard array sort (numpy's default introsort family)."""
    keys.sort()
