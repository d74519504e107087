"""Time-stamped scalar diagnostics shared by the 2-D and 3-D drivers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class DiagnosticSeries:
    """Ordered ``(time, name, value)`` records.

    Times must be non-decreasing within each named series; records for
    different names may interleave freely.
    """

    records: list[tuple[float, str, float]] = field(default_factory=list)
    _last: dict[str, float] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        records, self.records = list(self.records), []
        for t, name, value in records:
            self.add(t, name, value)

    def add(self, time: float, name: str, value: float) -> None:
        last = self._last.get(name)
        if last is not None and time < last:
            raise ValueError(
                f"time {time!r} precedes last record {last!r} of series {name!r}"
            )
        self.records.append((float(time), str(name), float(value)))
        self._last[name] = float(time)

    def extend(self, time: float, values: dict[str, float]) -> None:
        for name, value in values.items():
            self.add(time, name, value)

    def names(self) -> list[str]:
        return list(dict.fromkeys(name for _, name, _ in self.records))

    def series(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        rows = [(t, v) for t, n, v in self.records if n == name]
        if not rows:
            return np.empty(0), np.empty(0)
        t, v = zip(*rows)
        return np.asarray(t), np.asarray(v)

    def last(self, name: str) -> float:
        _, v = self.series(name)
        if v.size == 0:
            raise KeyError(name)
        return float(v[-1])

    def __len__(self) -> int:
        return len(self.records)
