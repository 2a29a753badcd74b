from __future__ import annotations

import os
from collections import OrderedDict

import numpy as np
from hypothesis import HealthCheck, settings

from learnedsort.model import CDF_CEILING, EcdfModel

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.register_profile("ci", deadline=None, max_examples=25)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# acceptance criterion -> list of (ok, detail); filled by test_acceptance
ACCEPTANCE: "OrderedDict[int, list[tuple[str, str]]]" = OrderedDict()


def record(criterion: int, status: str, detail: str) -> None:
    ACCEPTANCE.setdefault(criterion, []).append((status, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[crit]
        statuses = {s for s, _ in parts}
        if "FAIL" in statuses:
            overall = "FAIL"
        elif "WARN" in statuses:
            overall = "WARN"
        else:
            overall = "PASS"
        bad = [d for s, d in parts if s != "PASS"]
        detail = "; ".join(bad[:3]) if bad else parts[-1][1]
        tr.write_line(f"criterion {crit}: {overall} ({len(parts)} checks) {detail}")


def exact_model(keys, leaf_count: int) -> EcdfModel:
    """Model with root slope 1 whose leaf k predicts |{x in keys: x < k}| / len(keys).

    Exact on integer keys in [0, leaf_count).
    """
    keys = np.asarray(keys, dtype=np.float64)
    leaves = np.zeros((leaf_count, 4))
    vals = np.array([np.count_nonzero(keys < k) for k in range(leaf_count)]) / len(keys)
    vals = np.minimum(vals, CDF_CEILING)
    leaves[:, 1] = vals
    leaves[:, 2] = vals
    leaves[:, 3] = vals
    return EcdfModel(1.0, 0.0, leaves)


def identity_model() -> EcdfModel:
    """cdf(x) = x on [0, 1)."""
    return EcdfModel(1.0, 0.0, np.array([[1.0, 0.0, 0.0, CDF_CEILING]]))
