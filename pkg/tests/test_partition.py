from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conftest import exact_model
from learnedsort.memory import AuxTracker
from learnedsort.model import EcdfModel, bucket_index, draw_sample, train_model
from learnedsort.partition import (
    DefragWorkspace,
    FragmentDescriptor,
    FragmentPool,
    PartitionResult,
    defragment,
    partition_pass,
)

HAND_KEYS = [5.0, 1.0, 9.0, 2.0, 8.0, 3.0]


def hand_trace():
    """Six keys, f=2, c=2, exact eCDF: cdf(x) = |{k < x}| / 6.

    predictions: 5 -> 3/6 -> bucket 1, 1 -> 0 -> 0, 9 -> 5/6 -> 1,
                 2 -> 1/6 -> 0,        8 -> 4/6 -> 1, 3 -> 2/6 -> 0

      read 5   frag1=[5]
      read 1   frag0=[1]
      read 9   frag1=[5,9] full -> A[0:2]=[5,9], log (1,2), w=2
      read 2   frag0=[1,2] full -> A[2:4]=[1,2], log (0,2), w=4
      read 8   frag1=[8]
      read 3   frag0=[3]
      flush    frag0 -> A[4]=3, log (0,1);  frag1 -> A[5]=8, log (1,1)
    """
    keys = np.array(HAND_KEYS)
    model = exact_model(keys, 10)
    result = partition_pass(keys, model, 0, 0, fanout=2, capacity=2)
    return keys, model, result


def test_hand_trace_partition():
    keys, _, result = hand_trace()
    assert keys.tolist() == [5, 9, 1, 2, 3, 8]
    assert result.bucket_sizes.tolist() == [3, 3]
    assert result.fragment_log == [(1, 2), (0, 2), (0, 1), (1, 1)]
    assert all(isinstance(d, FragmentDescriptor) for d in result.fragment_log)


@pytest.mark.parametrize("mode", ["strict", "reference"])
def test_hand_trace_defragment(mode):
    keys, _, result = hand_trace()
    offsets = defragment(keys, result, mode=mode, capacity=2)
    assert keys.tolist() == [1, 2, 3, 5, 9, 8]
    assert offsets.tolist() == [0, 3]


def test_equal_keys_single_bucket():
    keys = np.full(37, 4.0)
    model = EcdfModel.constant(0.3, 8)
    result = partition_pass(keys, model, 0, 0, fanout=5, capacity=4)
    assert np.count_nonzero(result.bucket_sizes) == 1
    assert result.bucket_sizes[1] == 37
    offsets = defragment(keys, result, capacity=4)
    assert keys.tolist() == [4.0] * 37
    assert offsets.tolist() == [0, 0, 37, 37, 37]


def test_single_bucket_defragment_is_noop():
    keys = np.array([3.0, 1.0, 2.0])
    result = PartitionResult(np.array([3]), np.array([0]), np.array([3]))
    assert defragment(keys, result, capacity=3).tolist() == [0]
    assert keys.tolist() == [3.0, 1.0, 2.0]


def _normal_model(keys):
    return train_model(draw_sample(keys, 0.01, 0))


def test_normal_partition_recount():
    keys = np.random.default_rng(1).normal(size=100_000)
    before = keys.copy()
    model = _normal_model(keys)
    result = partition_pass(keys, model, 0, 0, fanout=1000, capacity=100)
    assert result.bucket_sizes.sum() == 100_000
    recount = np.bincount([bucket_index(model, x, 0, 1000) for x in before], minlength=1000)
    assert np.array_equal(recount, result.bucket_sizes)
    per_bucket = np.bincount(result.log_buckets, weights=result.log_sizes, minlength=1000)
    assert np.array_equal(per_bucket, result.bucket_sizes)
    assert np.all(result.log_sizes >= 1) and np.all(result.log_sizes <= 100)


def test_strict_matches_reference_on_100k():
    rng = np.random.default_rng(2)
    keys = rng.lognormal(size=100_000)
    model = _normal_model(keys)
    result = partition_pass(keys, model, 0, 0, fanout=1000, capacity=100)
    other = keys.copy()
    off_a = defragment(keys, result, mode="strict", capacity=100)
    off_b = defragment(other, result, mode="reference", capacity=100)
    assert np.array_equal(keys.view(np.uint64), other.view(np.uint64))
    assert np.array_equal(off_a, off_b)
    for b in range(1000):
        lo, hi = off_a[b], off_a[b] + result.bucket_sizes[b]
        assert all(bucket_index(model, x, 0, 1000) == b for x in keys[lo:hi][:5])


def test_level_one_partition_of_a_bucket():
    rng = np.random.default_rng(4)
    keys = rng.uniform(0, 1, size=50_000)
    model = _normal_model(keys)
    top = partition_pass(keys, model, 0, 0, fanout=10, capacity=16)
    offsets = defragment(keys, top, capacity=16)
    i = 3
    s, e = offsets[i], offsets[i] + top.bucket_sizes[i]
    sub = partition_pass(keys, model, 1, i, fanout=10, capacity=16, start=s, stop=e)
    sub_off = defragment(keys, sub, start=s, capacity=16)
    for j in range(10):
        part = keys[s + sub_off[j]: s + sub_off[j] + sub.bucket_sizes[j]]
        assert all(bucket_index(model, x, 1, 10, i) == j for x in part)


def test_corrupt_state_is_rejected():
    keys, _, result = hand_trace()
    bad = PartitionResult(np.array([4, 2]), result.log_buckets, result.log_sizes)
    for mode in ("strict", "reference"):
        with pytest.raises(ValueError, match="corrupt partition state"):
            defragment(keys.copy(), bad, mode=mode, capacity=2)
    bad_log = PartitionResult(result.bucket_sizes, np.array([1, 0, 1, 0]), result.log_sizes)
    with pytest.raises(ValueError, match="corrupt partition state"):
        defragment(keys.copy(), bad_log, capacity=2)


def test_pool_fixed_storage_and_reuse():
    tracker = AuxTracker()
    pool = FragmentPool(7, 5, np.float64, tracker)
    assert pool.key_storage == 35 == tracker.peak["keys"]
    keys = np.random.default_rng(0).normal(size=500)
    model = _normal_model(keys)
    for _ in range(3):
        partition_pass(keys, model, 0, 0, fanout=7, capacity=5, pool=pool)
        assert pool.is_empty()
    assert tracker.peak["keys"] == 35


def test_strict_key_storage_bound():
    tracker = AuxTracker()
    f, c = 50, 8
    pool = FragmentPool(f, c, np.float64, tracker)
    work = DefragWorkspace(pool, 20_000, tracker)
    keys = np.random.default_rng(7).exponential(size=20_000)
    model = _normal_model(keys)
    result = partition_pass(keys, model, 0, 0, fanout=f, capacity=c, pool=pool)
    defragment(keys, result, capacity=c, workspace=work)
    assert tracker.peak["keys"] <= f * c + c


@st.composite
def partition_case(draw):
    n = draw(st.integers(1, 600))
    keys = draw(hnp.arrays(np.float64, n, elements=st.floats(-1e6, 1e6, allow_nan=False)))
    f = draw(st.integers(2, 40))
    c = draw(st.integers(1, 12))
    return keys, f, c


@given(partition_case())
def test_multiset_and_strict_equals_reference(case):
    keys, f, c = case
    model = train_model(draw_sample(keys, 1.0), 16)
    original = np.sort(keys)
    work = keys.copy()
    result = partition_pass(work, model, 0, 0, fanout=f, capacity=c)
    assert np.array_equal(np.sort(work), original)
    # at most one partial fragment per bucket in the flush region
    full = result.log_sizes == c
    n_full = int(np.argmin(full)) if not full.all() else len(full)
    assert full[:n_full].all() and not full[n_full:].any()
    tail = result.log_buckets[n_full:]
    assert np.all(np.diff(tail) > 0)

    ref = work.copy()
    off = defragment(work, result, mode="strict", capacity=c)
    defragment(ref, result, mode="reference", capacity=c)
    assert np.array_equal(work, ref)
    assert np.array_equal(np.sort(work), original)
    for b in range(f):
        seg = work[off[b]: off[b] + result.bucket_sizes[b]]
        assert all(bucket_index(model, x, 0, f) == b for x in seg)
