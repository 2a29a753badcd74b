"""Accounting for auxiliary buffers allocated by the sorter.

Every scratch array the sort pipeline needs goes through an
:class:`AuxTracker`, so tests can bound peak auxiliary storage per category
("keys", "counters", "descriptors", "training").
"""
from __future__ import annotations

from collections import defaultdict

import numpy as np


class AuxTracker:
    def __init__(self):
        self.current: dict[str, int] = defaultdict(int)
        self.peak: dict[str, int] = defaultdict(int)
        self._live: dict[int, tuple[str, int]] = {}

    def alloc(self, category: str, shape, dtype) -> np.ndarray:
        arr = np.empty(shape, dtype=dtype)
        self.current[category] += arr.size
        self.peak[category] = max(self.peak[category], self.current[category])
        self._live[id(arr)] = (category, arr.size)
        return arr

    def free(self, arr: np.ndarray | None) -> None:
        if arr is None:
            return
        category, size = self._live.pop(id(arr))
        self.current[category] -= size

    def adopt(self, category: str, arr: np.ndarray) -> np.ndarray:
        """Account for an array allocated elsewhere (e.g. a training sample)."""
        self.current[category] += arr.size
        self.peak[category] = max(self.peak[category], self.current[category])
        self._live[id(arr)] = (category, arr.size)
        return arr


class _NullTracker(AuxTracker):
    def alloc(self, category, shape, dtype):
        return np.empty(shape, dtype=dtype)

    def free(self, arr):
        pass

    def adopt(self, category, arr):
        return arr


NULL_TRACKER = _NullTracker()
