from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from learnedsort import bench
from learnedsort.baselines import lsd_radix_sort
from learnedsort.bench import (
    CSV_HEADER,
    BenchmarkRecord,
    read_csv,
    read_keys_binary,
    run_benchmark,
    verify_permutation,
    verify_sorted,
    write_csv,
    write_keys_binary,
)
from learnedsort.datagen import DatasetSpec, generate


def test_verify_sorted():
    assert verify_sorted([1, 2, 2, 3])
    assert not verify_sorted([2, 1])
    assert verify_sorted([])


def test_verify_permutation():
    assert verify_permutation([3, 1, 2], [1, 2, 3])
    assert not verify_permutation([1, 1], [1, 2])
    assert not verify_permutation([1, 2], [1, 2, 3])


def test_read_two_u64(tmp_path):
    p = tmp_path / "k.bin"
    p.write_bytes(b"\x01" + b"\x00" * 7 + b"\x02" + b"\x00" * 7)
    assert read_keys_binary(p, "u64").tolist() == [1, 2]


def test_read_empty(tmp_path):
    p = tmp_path / "e.bin"
    p.write_bytes(b"")
    assert read_keys_binary(p, "f64").size == 0


def test_read_errors(tmp_path):
    p = tmp_path / "odd.bin"
    p.write_bytes(b"\x00" * 12)
    with pytest.raises(ValueError, match="multiple of 8"):
        read_keys_binary(p, "u64")
    q = tmp_path / "nan.bin"
    np.array([1.0, np.nan], dtype="<f8").tofile(q)
    with pytest.raises(ValueError, match="NaN"):
        read_keys_binary(q, "f64")
    with pytest.raises(ValueError):
        read_keys_binary(q, "i32")


@pytest.mark.parametrize("family, dtype, kind", [("normal", np.float64, "f64"),
                                                 ("zipf", np.uint64, "u64")])
def test_binary_round_trip(tmp_path, family, dtype, kind):
    keys = generate(DatasetSpec(family, 100_000, {}, 3), dtype)
    p = tmp_path / "keys.bin"
    write_keys_binary(keys, p)
    assert p.stat().st_size == 8 * keys.size
    back = read_keys_binary(p, kind)
    assert np.array_equal(back.view(np.uint64), keys.view(np.uint64))


def _rec(**kw):
    base = dict(algorithm="learned_sort2", dataset="normal(mu=0;sigma=1)", n=1000, seed=1,
                duplicate_ratio=0.0, elapsed_ns=12345, rate_keys_per_sec=1000 / 12345e-9,
                sorted_ok=True, permutation_ok=True)
    base.update(kw)
    return BenchmarkRecord(**base)


def test_csv_empty_and_one(tmp_path):
    p = tmp_path / "a.csv"
    write_csv([], p)
    assert p.read_text().splitlines() == [",".join(CSV_HEADER)]
    write_csv([_rec()], p)
    lines = p.read_text().splitlines()
    assert len(lines) == 2
    assert lines[1].split(",")[6] == f"{1000 / 12345e-9:.6g}"


def test_csv_unwritable(tmp_path):
    with pytest.raises(OSError):
        write_csv([_rec()], tmp_path / "missing" / "x.csv")


@given(st.lists(st.builds(
    _rec,
    algorithm=st.sampled_from(list(bench.ALGORITHMS)),
    n=st.integers(0, 10**9), seed=st.integers(0, 2**31),
    duplicate_ratio=st.floats(0, 1), elapsed_ns=st.integers(1, 10**12),
    rate_keys_per_sec=st.floats(0, 1e12),
    sorted_ok=st.booleans(), permutation_ok=st.booleans()), max_size=5))
def test_csv_round_trip(tmp_path_factory, records):
    p = tmp_path_factory.mktemp("csv") / "r.csv"
    write_csv(records, p)
    back = read_csv(p)
    assert back == [r.rounded() for r in records]
    write_csv(back, p)
    assert read_csv(p) == back


def test_run_benchmark_normal_1e6():
    recs = run_benchmark(DatasetSpec("normal", 10**6, {}, 0), ["learned_sort2"], 3)
    assert len(recs) == 1
    r = recs[0]
    assert r.sorted_ok and r.permutation_ok
    assert r.rate_keys_per_sec * r.elapsed_ns / 1e9 == pytest.approx(r.n)


def test_run_benchmark_all_algorithms_u64():
    recs = run_benchmark(DatasetSpec("root_dups", 50_000), list(bench.ALGORITHMS), 2,
                         dtype=np.uint64)
    assert [r.algorithm for r in recs] == list(bench.ALGORITHMS)
    assert all(r.ok for r in recs)
    assert recs[0].duplicate_ratio == pytest.approx(1 - 223 / 50_000)


def test_run_benchmark_errors():
    with pytest.raises(ValueError, match="unknown algorithm"):
        run_benchmark(DatasetSpec("normal", 10), ["bogosort"], 1)
    with pytest.raises(ValueError):
        run_benchmark(DatasetSpec("normal", 10), ["std_sort"], 0)


def test_verification_failure_is_flagged(monkeypatch):
    monkeypatch.setitem(bench.ALGORITHMS, "broken", lambda a: a.__setitem__(0, -1e300))
    (rec,) = run_benchmark(DatasetSpec("normal", 1000), ["broken"], 1)
    assert not rec.permutation_ok and not rec.ok


def test_exponential_pipeline_output_verifies():
    keys = generate(DatasetSpec("exponential", 10**6))
    before = keys.copy()
    bench.learned_sort(keys)
    assert verify_sorted(keys) and verify_permutation(before, keys)


@pytest.mark.parametrize("dtype", [np.float64, np.uint64])
def test_lsd_radix(dtype):
    rng = np.random.default_rng(1)
    if dtype == np.float64:
        keys = np.concatenate([rng.normal(scale=1e10, size=20_000),
                               [np.inf, -np.inf, 0.0, -0.0, 5e-324, -5e-324]])
    else:
        keys = rng.integers(0, 2**64 - 1, size=20_000, dtype=np.uint64, endpoint=True)
    oracle = np.sort(keys)
    lsd_radix_sort(keys)
    assert np.array_equal(keys, oracle)


def test_cli_run_and_file(tmp_path, capsys):
    out = tmp_path / "r.csv"
    rc = bench.main(["run", "--family", "zipf", "--n", "2e4", "--seed", "3",
                     "--param", "skew=0.99", "--algos", "learned_sort2,lsd_radix",
                     "--repeats", "2", "--csv", str(out)])
    assert rc == 0
    recs = read_csv(out)
    assert [r.dataset for r in recs] == ["zipf(skew=0.99)"] * 2
    capsys.readouterr()
    keys = tmp_path / "k.bin"
    write_keys_binary(generate(DatasetSpec("uniform", 30_000), np.uint64), keys)
    rc = bench.main(["file", "--path", str(keys), "--type", "u64", "--algos", "std_sort",
                     "--repeats", "1"])
    assert rc == 0
    assert capsys.readouterr().out.startswith(",".join(CSV_HEADER))


def test_cli_sweeps(tmp_path):
    out = tmp_path / "z.csv"
    assert bench.main(["sweep-zipf", "--n", "20000", "--skews", "0.5,0.99",
                       "--repeats", "1", "--csv", str(out)]) == 0
    assert [r.dataset for r in read_csv(out)] == ["normal(mu=0;sigma=1)", "zipf(skew=0.5)",
                                                  "zipf(skew=0.99)"]
    assert bench.main(["sweep-size", "--family", "exponential", "--sizes", "1e3,2e4",
                       "--repeats", "1", "--csv", str(out)]) == 0
    assert [r.n for r in read_csv(out)] == [1000, 20_000]


def test_cli_errors(tmp_path, monkeypatch):
    assert bench.main(["run", "--family", "normal", "--n", "10", "--algos", "nope"]) == 2
    assert bench.main(["run", "--family", "normal", "--n", "10", "--param", "k=1"]) == 2
    assert bench.main(["file", "--path", str(tmp_path / "none.bin")]) == 2
    monkeypatch.setitem(bench.ALGORITHMS, "broken", lambda a: a.fill(0))
    assert bench.main(["run", "--family", "normal", "--n", "100", "--algos", "broken",
                       "--repeats", "1"]) == 1
    with pytest.raises(SystemExit):
        bench.main(["run", "--family", "normal", "--n", "1.5"])
