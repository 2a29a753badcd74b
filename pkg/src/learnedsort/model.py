"""Two-layer empirical-CDF model used to route keys into buckets.

The root layer is a min-max interpolation from the key range onto
``[0, leaf_count)``.  Each leaf is a least-squares line fitted to the
(key, rank / sample_size) pairs routed to it, clamped to the empirical CDF
values observed at the leaf's first and last sample key.  Because those
clamps are non-decreasing and adjacent leaves share their boundary value,
the composed prediction is monotone in the key, which is what makes the
partitioned output quasi-sorted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

MIN_SAMPLE = 256
MAX_SAMPLE = 1_000_000
DEFAULT_LEAF_COUNT = 1000

# Largest prediction is 1 - EPS so that floor(cdf * f) < f.
EPS = 2.0**-52
CDF_CEILING = 1.0 - EPS

SLOPE, INTERCEPT, LO, HI = range(4)


@dataclass(frozen=True)
class TrainingSample:
    keys: np.ndarray
    source_size: int

    def __post_init__(self):
        if not 1 <= len(self.keys) <= self.source_size:
            raise ValueError("sample size must be in [1, source_size]")


@dataclass(frozen=True, eq=False)
class EcdfModel:
    """Trained model.  ``leaves`` has one row ``(slope, intercept, lo, hi)`` per leaf.

    Instances are immutable after training and safe to share between threads.
    """

    root_slope: float
    root_intercept: float
    leaves: np.ndarray

    def __post_init__(self):
        leaves = np.ascontiguousarray(self.leaves, dtype=np.float64)
        if leaves.ndim != 2 or leaves.shape[1] != 4 or leaves.shape[0] < 1:
            raise ValueError("leaves must have shape (leaf_count, 4)")
        leaves.setflags(write=False)
        object.__setattr__(self, "leaves", leaves)

    @property
    def leaf_count(self) -> int:
        return self.leaves.shape[0]

    @property
    def slopes(self) -> np.ndarray:
        return self.leaves[:, SLOPE]

    @property
    def intercepts(self) -> np.ndarray:
        return self.leaves[:, INTERCEPT]

    @property
    def lo_clamps(self) -> np.ndarray:
        return self.leaves[:, LO]

    @property
    def hi_clamps(self) -> np.ndarray:
        return self.leaves[:, HI]

    @classmethod
    def constant(cls, value: float, leaf_count: int = 1) -> "EcdfModel":
        """A model that predicts ``value`` for every key."""
        value = min(max(float(value), 0.0), CDF_CEILING)
        leaves = np.zeros((leaf_count, 4))
        leaves[:, INTERCEPT] = value
        leaves[:, LO] = value
        leaves[:, HI] = value
        return cls(0.0, 0.0, leaves)

    def check_invariants(self) -> None:
        lo, hi = self.lo_clamps, self.hi_clamps
        if not (np.all(lo >= 0.0) and np.all(hi <= 1.0) and np.all(lo <= hi)):
            raise AssertionError("clamp interval outside [0, 1] or inverted")
        if np.any(np.diff(lo) < 0) or np.any(np.diff(hi) < 0):
            raise AssertionError("clamp intervals are not non-decreasing")
        if np.any(self.slopes < 0) or self.root_slope < 0:
            raise AssertionError("negative slope")

    def predict_cdf(self, x):
        """Predicted CDF for a scalar key or an array of keys."""
        if np.ndim(x) == 0:
            return _cdf(np.float64(x), self.root_slope, self.root_intercept, self.leaves)
        xs = np.ascontiguousarray(x)
        out = np.empty(xs.shape[0], dtype=np.float64)
        _cdf_many(xs, self.root_slope, self.root_intercept, self.leaves, out)
        return out

    def bucket_index(self, x, level: int, fanout: int, parent: int = 0) -> int:
        return bucket_index(self, x, level, fanout, parent)


@njit(cache=True, nogil=True)
def _cdf(x, root_slope, root_intercept, leaves):
    xf = np.float64(x)
    t = root_slope * xf + root_intercept
    n_leaves = leaves.shape[0]
    if t >= n_leaves:
        j = n_leaves - 1
    elif t > 0.0:
        j = int(t)
    else:
        j = 0
    raw = leaves[j, 0] * xf + leaves[j, 1]
    lo = leaves[j, 2]
    hi = leaves[j, 3]
    if raw < lo:
        return lo
    if raw > hi:
        return hi
    if raw != raw:
        # inf * 0 on infinite keys
        return hi if xf > 0.0 else lo
    return raw


@njit(cache=True, nogil=True)
def _cdf_many(xs, root_slope, root_intercept, leaves, out):
    for k in range(xs.shape[0]):
        out[k] = _cdf(xs[k], root_slope, root_intercept, leaves)


@njit(cache=True, nogil=True)
def _bucket0(cdf, fanout):
    return int(cdf * fanout)


@njit(cache=True, nogil=True)
def _bucket1(cdf, fanout, parent):
    b = int(cdf * (fanout * fanout)) - parent * fanout
    if b < 0:
        return 0
    if b >= fanout:
        return fanout - 1
    return b


def bucket_index(model: EcdfModel, x, level: int, fanout: int, parent: int = 0) -> int:
    """Bucket of ``x`` at partitioning level 0 or 1 (level 1 relative to ``parent``)."""
    cdf = model.predict_cdf(x)
    return bucket_from_cdf(cdf, level, fanout, parent)


def bucket_from_cdf(cdf: float, level: int, fanout: int, parent: int = 0) -> int:
    if level == 0:
        return _bucket0(cdf, fanout)
    if level == 1:
        if not 0 <= parent < fanout:
            raise ValueError("parent bucket out of range")
        return _bucket1(cdf, fanout, parent)
    raise ValueError("level must be 0 or 1")


def sample_size(n: int, rate: float) -> int:
    k = math.ceil(rate * n)
    return min(max(k, MIN_SAMPLE), MAX_SAMPLE, n)


def draw_sample(keys, rate: float = 0.01, rng_seed: int = 0) -> TrainingSample:
    """Uniform sample (without replacement) of ``keys``, returned sorted."""
    n = len(keys)
    if n == 0:
        raise ValueError("empty input")
    if not 0.0 < rate <= 1.0:
        raise ValueError("invalid sample rate")
    k = sample_size(n, rate)
    keys = np.asarray(keys)
    if k == n:
        sample = np.array(keys, copy=True)
    else:
        rng = np.random.default_rng(rng_seed)
        idx = rng.choice(n, size=k, replace=False, shuffle=False)
        sample = keys[idx]
    sample.sort()
    return TrainingSample(sample, n)


def train_model(sample: TrainingSample, leaf_count: int = DEFAULT_LEAF_COUNT) -> EcdfModel:
    if leaf_count < 1:
        raise ValueError("leaf_count must be >= 1")
    xs = np.asarray(sample.keys, dtype=np.float64)
    m = xs.shape[0]
    if m == 0:
        raise ValueError("empty sample")
    if xs[0] == xs[-1]:
        return EcdfModel.constant(0.0, leaf_count)
    finite = xs[np.isfinite(xs)]
    root_slope, lo_key = 0.0, 0.0
    if finite.size >= 2 and finite[-1] > finite[0]:
        lo_key = finite[0]
        with np.errstate(over="ignore"):
            root_slope = leaf_count / (finite[-1] - finite[0])
        if not math.isfinite(root_slope):
            root_slope = 0.0
    root_intercept = -lo_key * root_slope
    xs_fit = np.clip(xs, finite[0], finite[-1]) if 0 < finite.size < m else xs

    routed = np.empty(m, dtype=np.int64)
    _route(xs, root_slope, root_intercept, leaf_count, routed)

    # rank of a key = number of sample keys strictly below it
    ranks = np.searchsorted(xs, xs, side="left").astype(np.float64)
    ys = ranks / m

    # routed is sorted, so every leaf owns a contiguous slice of the sample
    starts = np.searchsorted(routed, np.arange(leaf_count + 1), side="left")
    counts = np.diff(starts)
    lo = starts[:-1] / m
    hi = starts[1:] / m
    np.maximum.accumulate(lo, out=lo)
    np.maximum.accumulate(hi, out=hi)
    hi = np.minimum(hi, CDF_CEILING)
    lo = np.minimum(lo, hi)

    safe = np.maximum(counts, 1)
    # keys near the float limits overflow; such leaves are caught below
    with np.errstate(over="ignore", invalid="ignore"):
        mean_x = np.bincount(routed, weights=xs_fit, minlength=leaf_count) / safe
        mean_y = np.bincount(routed, weights=ys, minlength=leaf_count) / safe
        dx = xs_fit - mean_x[routed]
        dy = ys - mean_y[routed]
        sxx = np.bincount(routed, weights=dx * dx, minlength=leaf_count)
        sxy = np.bincount(routed, weights=dx * dy, minlength=leaf_count)

    fitted = (counts >= 2) & (sxx > 0.0)
    slope = np.zeros(leaf_count)
    with np.errstate(over="ignore", invalid="ignore"):
        np.divide(sxy, sxx, out=slope, where=fitted)
    slope[~np.isfinite(slope) | (slope < 0.0)] = 0.0

    # extreme keys can overflow here; non-finite results are reset below
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if root_slope > 0.0:
            edges = lo_key + np.arange(leaf_count + 1) / root_slope
            left, right = edges[:-1], edges[1:]
            # keep the centroid-anchored line inside [lo, hi] over the whole
            # key interval of the leaf, so the clamps never flatten a run of keys
            room_left = np.where(mean_x > left, (mean_y - lo) / (mean_x - left), np.inf)
            room_right = np.where(right > mean_x, (hi - mean_y) / (right - mean_x), np.inf)
            slope = np.minimum(slope, np.maximum(np.minimum(room_left, room_right), 0.0))
            # leaves without a usable fit interpolate lo -> hi across their interval
            interp = np.where(right > left, (hi - lo) / (right - left), 0.0)
            interp[~np.isfinite(interp)] = 0.0
            slope = np.where(fitted, slope, interp)
            intercept = np.where(fitted, mean_y - slope * mean_x, lo - interp * left)
        else:
            intercept = np.where(fitted, mean_y - slope * mean_x, lo)

    bad = ~np.isfinite(intercept)
    slope[bad], intercept[bad] = 0.0, lo[bad]
    leaves = np.column_stack([slope, intercept, lo, hi])
    return EcdfModel(float(root_slope), float(root_intercept), leaves)


@njit(cache=True, nogil=True)
def _route(xs, root_slope, root_intercept, n_leaves, out):
    for k in range(xs.shape[0]):
        t = root_slope * xs[k] + root_intercept
        if t >= n_leaves:
            out[k] = n_leaves - 1
        elif t > 0.0:
            out[k] = int(t)
        else:
            out[k] = 0


def exact_ecdf(sample_keys: np.ndarray, x) -> np.ndarray:
    """Fraction of ``sample_keys`` strictly below ``x`` (binary search)."""
    return np.searchsorted(sample_keys, x, side="left") / len(sample_keys)
