"""Seeded synthetic key generators.

Families: uniform(0, N), normal, lognormal, chi_square, exponential, zipf,
mix_gauss, root_dups and two_dups.  Every generator is a pure function of
its :class:`DatasetSpec`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FAMILIES = (
    "uniform", "normal", "lognormal", "chi_square", "exponential",
    "zipf", "mix_gauss", "root_dups", "two_dups",
)

# families whose keys are integral, and therefore also generated as uint64
INTEGER_FAMILIES = ("uniform", "zipf", "root_dups", "two_dups")

DEFAULT_PARAMS: dict[str, dict[str, float]] = {
    "uniform": {},
    "normal": {"mu": 0.0, "sigma": 1.0},
    "lognormal": {"mu": 0.0, "sigma": 0.5},
    "chi_square": {"k": 4.0},
    "exponential": {"lam": 2.0},
    "zipf": {"skew": 0.9},
    "mix_gauss": {"components": 5},
    "root_dups": {},
    "two_dups": {},
}


@dataclass(frozen=True)
class DatasetSpec:
    family: str
    n: int
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.n < 0:
            raise ValueError("n must be >= 0")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.family])
        if unknown:
            raise ValueError(f"unknown parameter {sorted(unknown)[0]!r} for {self.family}")

    def resolved(self) -> dict:
        return {**DEFAULT_PARAMS[self.family], **self.params}

    def label(self) -> str:
        p = self.resolved()
        if not p:
            return self.family
        return self.family + "(" + ";".join(f"{k}={v:g}" for k, v in sorted(p.items())) + ")"


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0 or not math.isfinite(value):
        raise ValueError(f"parameter {name} must be positive, got {value}")
    return value


def zipf_ranks(n_draws: int, universe: int, skew: float, rng: np.random.Generator) -> np.ndarray:
    """Ranks in ``[1, universe]`` with P(k) proportional to ``k**-skew``.

    Rejection-inversion sampling (Hörmann & Derflinger), vectorised over
    the pending draws; valid for any positive skew including ``skew < 1``.
    """
    s = skew

    def h_integral(x):
        log_x = np.log(x)
        return _helper2((1.0 - s) * log_x) * log_x

    def h(x):
        return np.exp(-s * np.log(x))

    def h_integral_inv(x):
        t = np.maximum(x * (1.0 - s), -1.0)
        return np.exp(_helper1(t) * x)

    hx1 = h_integral(np.float64(1.5)) - 1.0
    hn = h_integral(np.float64(universe + 0.5))
    s_th = 2.0 - h_integral_inv(h_integral(np.float64(2.5)) - h(np.float64(2.0)))

    out = np.empty(n_draws, dtype=np.int64)
    pending = np.arange(n_draws)
    while pending.size:
        u = hn + rng.random(pending.size) * (hx1 - hn)
        x = h_integral_inv(u)
        k = np.clip(np.rint(x), 1, universe)
        ok = (k - x <= s_th) | (u >= h_integral(k + 0.5) - h(k))
        out[pending[ok]] = k[ok]
        pending = pending[~ok]
    return out


def _helper1(x):
    # log1p(x) / x, continuous at 0
    x = np.asarray(x, dtype=np.float64)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x / 2.0 + x * x / 3.0, np.log1p(safe) / safe)


def _helper2(x):
    # expm1(x) / x, continuous at 0
    x = np.asarray(x, dtype=np.float64)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x / 2.0 + x * x / 6.0, np.expm1(safe) / safe)


def generate(spec: DatasetSpec, dtype=np.float64) -> np.ndarray:
    """Keys for ``spec`` as float64 or (integer families only) uint64."""
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float64), np.dtype(np.uint64)):
        raise ValueError(f"unsupported key type {dtype}")
    if dtype.kind == "u" and spec.family not in INTEGER_FAMILIES:
        raise ValueError(f"{spec.family} keys are not integral")
    n = spec.n
    p = spec.resolved()
    rng = np.random.default_rng(spec.seed)
    fam = spec.family

    if fam == "uniform":
        if dtype.kind == "u":
            return rng.integers(0, max(n, 1), size=n, dtype=np.uint64)
        keys = rng.uniform(0.0, n, size=n)
    elif fam == "normal":
        keys = rng.normal(float(p["mu"]), _positive("sigma", p["sigma"]), size=n)
    elif fam == "lognormal":
        keys = rng.lognormal(float(p["mu"]), _positive("sigma", p["sigma"]), size=n)
    elif fam == "chi_square":
        keys = rng.chisquare(_positive("k", p["k"]), size=n)
    elif fam == "exponential":
        keys = rng.exponential(1.0 / _positive("lam", p["lam"]), size=n)
    elif fam == "zipf":
        skew = _positive("skew", p["skew"])
        ranks = zipf_ranks(n, max(n, 1), skew, rng)
        return ranks.astype(dtype)
    elif fam == "mix_gauss":
        k = int(p["components"])
        if k < 1:
            raise ValueError("parameter components must be >= 1")
        means = rng.uniform(0.0, 100.0, size=k)
        stds = rng.uniform(0.5, 10.0, size=k)
        weights = rng.dirichlet(np.ones(k))
        comp = rng.choice(k, size=n, p=weights)
        keys = rng.standard_normal(n) * stds[comp] + means[comp]
    elif fam == "root_dups":
        i = np.arange(n, dtype=np.uint64)
        return (i % np.uint64(max(math.isqrt(n), 1))).astype(dtype)
    elif fam == "two_dups":
        i = np.arange(n, dtype=np.uint64)
        mod = np.uint64(max(n, 1))
        sq = (i % mod) * (i % mod) % mod
        return ((sq + np.uint64(n // 2)) % mod).astype(dtype)
    return keys


def duplicate_ratio(keys) -> float:
    """``1 - distinct / n``; 0 for an empty input."""
    keys = np.asarray(keys)
    if keys.size == 0:
        return 0.0
    s = np.sort(keys, kind="quicksort")
    distinct = 1 + int(np.count_nonzero(s[1:] != s[:-1]))
    return 1.0 - distinct / keys.size
