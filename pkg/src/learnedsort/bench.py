"""Benchmark harness: generate or ingest keys, time sorters, verify, emit CSV.

Run ``bench --help`` (or ``python -m learnedsort.bench --help``) for the CLI.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .baselines import lsd_radix_sort, std_sort
from .datagen import DEFAULT_PARAMS, FAMILIES, DatasetSpec, duplicate_ratio, generate
from .sorter import learned_sort

log = logging.getLogger("learnedsort.bench")

ALGORITHMS: dict[str, Callable[[np.ndarray], object]] = {
    "learned_sort2": learned_sort,
    "std_sort": std_sort,
    "lsd_radix": lsd_radix_sort,
}

CSV_HEADER = ("algorithm", "dataset", "n", "seed", "dup_ratio", "elapsed_ns",
              "rate_keys_per_sec", "sorted_ok", "permutation_ok")

DEFAULT_REPEATS = 5


@dataclass(frozen=True)
class BenchmarkRecord:
    algorithm: str
    dataset: str
    n: int
    seed: int
    duplicate_ratio: float
    elapsed_ns: int
    rate_keys_per_sec: float
    sorted_ok: bool
    permutation_ok: bool

    @property
    def ok(self) -> bool:
        return self.sorted_ok and self.permutation_ok

    def row(self) -> list[str]:
        return [self.algorithm, self.dataset, str(self.n), str(self.seed),
                f"{self.duplicate_ratio:.6g}", str(self.elapsed_ns),
                f"{self.rate_keys_per_sec:.6g}", _fmt_bool(self.sorted_ok),
                _fmt_bool(self.permutation_ok)]

    @classmethod
    def from_row(cls, row: Sequence[str]) -> "BenchmarkRecord":
        if len(row) != len(CSV_HEADER):
            raise ValueError(f"expected {len(CSV_HEADER)} fields, got {len(row)}")
        return cls(row[0], row[1], int(row[2]), int(row[3]), float(row[4]), int(row[5]),
                   float(row[6]), _parse_bool(row[7]), _parse_bool(row[8]))

    def rounded(self) -> "BenchmarkRecord":
        """The record as it reads back from CSV (floats at 6 significant digits)."""
        return BenchmarkRecord.from_row(self.row())


def _fmt_bool(v: bool) -> str:
    return "true" if v else "false"


def _parse_bool(s: str) -> bool:
    if s not in ("true", "false"):
        raise ValueError(f"not a flag: {s!r}")
    return s == "true"


def rate(n: int, elapsed_ns: int) -> float:
    return n / (max(elapsed_ns, 1) * 1e-9)


# -- verification -------------------------------------------------------------

def verify_sorted(keys) -> bool:
    keys = np.asarray(keys)
    if keys.size < 2:
        return True
    return bool(np.all(keys[:-1] <= keys[1:]))


def verify_permutation(before, after, *, oracle: np.ndarray | None = None) -> bool:
    """True iff ``after`` holds exactly the multiset of ``before``.

    ``oracle`` may carry a precomputed ``np.sort(before)`` to avoid re-sorting
    the input for every repeat.
    """
    before = np.asarray(before)
    after = np.asarray(after)
    if before.shape != after.shape:
        return False
    expected = np.sort(before) if oracle is None else oracle
    return bool(np.array_equal(expected, np.sort(after)))


# -- binary ingestion ---------------------------------------------------------

_FILE_TYPES = {"f64": np.dtype("<f8"), "u64": np.dtype("<u8")}


def read_keys_binary(path, type: str = "f64") -> np.ndarray:
    """Raw little-endian 64-bit keys in file order."""
    if type not in _FILE_TYPES:
        raise ValueError(f"unknown key type {type!r} (expected f64 or u64)")
    size = os.path.getsize(path)
    if size % 8:
        raise ValueError(f"{path}: size {size} is not a multiple of 8 bytes")
    raw = np.fromfile(path, dtype=_FILE_TYPES[type])
    keys = raw.astype(raw.dtype.newbyteorder("="), copy=False)
    if type == "f64" and np.isnan(keys).any():
        raise ValueError(f"{path}: NaN key at index {int(np.flatnonzero(np.isnan(keys))[0])}")
    return keys


def write_keys_binary(keys: np.ndarray, path) -> None:
    keys = np.asarray(keys)
    dt = {"f": _FILE_TYPES["f64"], "u": _FILE_TYPES["u64"]}.get(keys.dtype.kind)
    if dt is None or keys.dtype.itemsize != 8:
        raise ValueError(f"unsupported key type {keys.dtype}")
    keys.astype(dt, copy=False).tofile(path)


# -- CSV ----------------------------------------------------------------------

def write_csv(records: Sequence[BenchmarkRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        _write_rows(records, fh)


def _write_rows(records, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.row())


def read_csv(path) -> list[BenchmarkRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: missing or unexpected CSV header")
    return [BenchmarkRecord.from_row(r) for r in rows[1:]]


# -- running ------------------------------------------------------------------

_warmed: set[tuple[str, str]] = set()


def _warm_up(name: str, dtype: np.dtype) -> None:
    # trigger JIT compilation outside the timed region
    key = (name, dtype.str)
    if key in _warmed:
        return
    rng = np.random.default_rng(12345)
    probe = rng.integers(0, 1 << 20, size=20_000).astype(dtype)
    ALGORITHMS[name](probe)
    _warmed.add(key)


def _resolve_algorithms(algorithms: Sequence[str]) -> list[str]:
    names = list(algorithms)
    if not names:
        raise ValueError("no algorithms given")
    for name in names:
        if name not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")
    return names


def run_benchmark(source, algorithms: Sequence[str], repeats: int = DEFAULT_REPEATS, *,
                  dtype=np.float64, file_type: str = "f64") -> list[BenchmarkRecord]:
    """Time every algorithm on ``source``; one best-of-``repeats`` record each.

    ``source`` is a :class:`DatasetSpec` or a path to a raw binary key file.
    A record's flags are true only if every repeat verified.
    """
    names = _resolve_algorithms(algorithms)
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if isinstance(source, DatasetSpec):
        data = generate(source, dtype)
        label, seed = source.label(), source.seed
    else:
        data = read_keys_binary(source, file_type)
        label, seed = f"file:{os.path.basename(os.fspath(source))}:{file_type}", 0
    return time_algorithms(data, label, seed, names, repeats)


def time_runs(name: str, data: np.ndarray, repeats: int,
              oracle: np.ndarray | None = None) -> tuple[list[int], bool, bool]:
    """Elapsed ns of every repeat plus the (all-repeats) verification flags."""
    fn = ALGORITHMS[name]
    oracle = np.sort(data) if oracle is None else oracle
    _warm_up(name, data.dtype)
    times = []
    sorted_ok = permutation_ok = True
    for _ in range(repeats):
        work = data.copy()
        t0 = time.perf_counter_ns()
        fn(work)
        times.append(time.perf_counter_ns() - t0)
        sorted_ok &= verify_sorted(work)
        permutation_ok &= verify_permutation(data, work, oracle=oracle)
        del work
    return times, sorted_ok, permutation_ok


def time_algorithms(data: np.ndarray, label: str, seed: int, algorithms: Sequence[str],
                    repeats: int = DEFAULT_REPEATS) -> list[BenchmarkRecord]:
    names = _resolve_algorithms(algorithms)
    n = int(data.shape[0])
    dup = duplicate_ratio(data)
    oracle = np.sort(data)
    records = []
    for name in names:
        times, sorted_ok, permutation_ok = time_runs(name, data, repeats, oracle)
        best = min(times)
        rec = BenchmarkRecord(name, label, n, seed, dup, best, rate(n, best),
                              sorted_ok, permutation_ok)
        if not rec.ok:
            log.error("verification failed: %s on %s (sorted=%s, permutation=%s)",
                      name, label, sorted_ok, permutation_ok)
        records.append(rec)
    return records


def sweep_zipf(n: int, skews: Sequence[float], algorithms=("learned_sort2",),
               repeats: int = DEFAULT_REPEATS, seed: int = 0) -> list[BenchmarkRecord]:
    """Zipf duplicate sweep plus a standard-normal (no duplicates) reference."""
    records = run_benchmark(DatasetSpec("normal", n, {}, seed), algorithms, repeats)
    for s in skews:
        records += run_benchmark(DatasetSpec("zipf", n, {"skew": s}, seed), algorithms, repeats)
    return records


def sweep_size(family: str, sizes: Sequence[int], algorithms=("learned_sort2",),
               repeats: int = DEFAULT_REPEATS, seed: int = 0,
               params: dict | None = None) -> list[BenchmarkRecord]:
    records = []
    for n in sizes:
        records += run_benchmark(DatasetSpec(family, n, params or {}, seed), algorithms, repeats)
    return records


# -- CLI ----------------------------------------------------------------------

def _parse_count(text: str) -> int:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a count: {text!r}") from None
    if not math.isfinite(v) or v < 0 or v != int(v):
        raise argparse.ArgumentTypeError(f"not a count: {text!r}")
    return int(v)


def _csv_list(conv):
    def parse(text: str):
        try:
            return [conv(t) for t in text.split(",") if t.strip()]
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _parse_param(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected k=v, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter {key} needs a numeric value") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bench", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, algos_default="learned_sort2"):
        sp.add_argument("--algos", type=_csv_list(str), default=_csv_list(str)(algos_default),
                        help=f"comma list from {{{','.join(ALGORITHMS)}}}")
        sp.add_argument("--repeats", type=int, default=DEFAULT_REPEATS)
        sp.add_argument("--csv", default=None, help="output path (stdout if omitted)")

    run = sub.add_parser("run", help="benchmark one generated dataset")
    run.add_argument("--family", required=True, choices=FAMILIES)
    run.add_argument("--n", type=_parse_count, required=True)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--param", type=_parse_param, action="append", default=[],
                     metavar="K=V")
    run.add_argument("--type", choices=("f64", "u64"), default="f64")
    common(run, "learned_sort2,std_sort,lsd_radix")

    zs = sub.add_parser("sweep-zipf", help="zipf skew sweep with a normal reference")
    zs.add_argument("--n", type=_parse_count, default=10**7)
    zs.add_argument("--skews", type=_csv_list(float), default=[0.5, 0.6, 0.7, 0.8, 0.9, 0.99])
    zs.add_argument("--seed", type=int, default=0)
    common(zs)

    ss = sub.add_parser("sweep-size", help="scalability sweep over input sizes")
    ss.add_argument("--family", required=True, choices=FAMILIES)
    ss.add_argument("--sizes", type=_csv_list(_parse_count), default=[10**6, 10**7, 10**8])
    ss.add_argument("--seed", type=int, default=0)
    ss.add_argument("--param", type=_parse_param, action="append", default=[],
                    metavar="K=V")
    common(ss)

    fp = sub.add_parser("file", help="benchmark raw little-endian 64-bit keys from a file")
    fp.add_argument("--path", required=True)
    fp.add_argument("--type", choices=("f64", "u64"), default="f64")
    common(fp, "learned_sort2,std_sort,lsd_radix")
    return p


def _params(pairs, family: str) -> dict:
    params = dict(pairs)
    unknown = set(params) - set(DEFAULT_PARAMS[family])
    if unknown:
        raise ValueError(f"unknown parameter {sorted(unknown)[0]!r} for {family}")
    return params


def _emit(records: list[BenchmarkRecord], path) -> None:
    # only verified records are reported as throughput numbers
    good = [r for r in records if r.ok]
    if path:
        write_csv(good, path)
        for r in good:
            print(f"{r.algorithm:14s} {r.dataset:28s} n={r.n:<10d} "
                  f"{r.rate_keys_per_sec / 1e6:9.2f} Mkeys/s")
    else:
        _write_rows(good, sys.stdout)
    for r in records:
        if not r.ok:
            print(f"FAILED verification: {r.algorithm} on {r.dataset} n={r.n} "
                  f"(sorted={r.sorted_ok}, permutation={r.permutation_ok})", file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _resolve_algorithms(args.algos)
        if args.command == "run":
            spec = DatasetSpec(args.family, args.n, _params(args.param, args.family), args.seed)
            dtype = np.uint64 if args.type == "u64" else np.float64
            records = run_benchmark(spec, args.algos, args.repeats, dtype=dtype)
        elif args.command == "sweep-zipf":
            records = sweep_zipf(args.n, args.skews, args.algos, args.repeats, args.seed)
        elif args.command == "sweep-size":
            records = sweep_size(args.family, args.sizes, args.algos, args.repeats, args.seed,
                                 _params(args.param, args.family))
        else:
            records = run_benchmark(args.path, args.algos, args.repeats, file_type=args.type)
    except (ValueError, OSError) as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 2
    _emit(records, args.csv)
    return 0 if all(r.ok for r in records) else 1


if __name__ == "__main__":
    sys.exit(main())
