"""Per-firm growth observations, stored column-wise."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np


class GrowthObservation(NamedTuple):
    """One firm over one period: pre-step size, log growth, unit count, largest unit."""

    size: float
    growth: float
    unit_count: int
    largest_unit: float

    @property
    def effective_units(self) -> float:
        return self.size / self.largest_unit


@dataclass(frozen=True, eq=False)
class ObservationTable:
    """Column store of growth observations.

    ``size`` is the size before the step, ``growth`` is ``ln(S_after / S_before)``,
    ``largest_unit`` is the largest unit before the step.
    """

    size: np.ndarray
    growth: np.ndarray
    unit_count: np.ndarray
    largest_unit: np.ndarray

    def __post_init__(self):
        cols = [np.asarray(c) for c in (self.size, self.growth, self.unit_count, self.largest_unit)]
        n = len(cols[0])
        if any(len(c) != n for c in cols):
            raise ValueError("observation columns must have equal length")
        object.__setattr__(self, "size", cols[0].astype(float, copy=False))
        object.__setattr__(self, "growth", cols[1].astype(float, copy=False))
        object.__setattr__(self, "unit_count", cols[2].astype(np.int64, copy=False))
        object.__setattr__(self, "largest_unit", cols[3].astype(float, copy=False))

    @property
    def effective_units(self) -> np.ndarray:
        return self.size / self.largest_unit

    def __len__(self) -> int:
        return len(self.size)

    def __iter__(self) -> Iterator[GrowthObservation]:
        for s, g, k, x in zip(self.size, self.growth, self.unit_count, self.largest_unit):
            yield GrowthObservation(float(s), float(g), int(k), float(x))

    def __getitem__(self, item):
        if isinstance(item, (int, np.integer)):
            return GrowthObservation(
                float(self.size[item]),
                float(self.growth[item]),
                int(self.unit_count[item]),
                float(self.largest_unit[item]),
            )
        return ObservationTable(
            self.size[item], self.growth[item], self.unit_count[item], self.largest_unit[item]
        )

    @classmethod
    def empty(cls) -> "ObservationTable":
        return cls(np.empty(0), np.empty(0), np.empty(0, np.int64), np.empty(0))

    @classmethod
    def from_records(cls, records: Iterable[GrowthObservation]) -> "ObservationTable":
        rows = list(records)
        if not rows:
            return cls.empty()
        s, g, k, x = zip(*((r[0], r[1], r[2], r[3]) for r in rows))
        return cls(np.array(s), np.array(g), np.array(k), np.array(x))

    @classmethod
    def concat(cls, tables: Sequence["ObservationTable"]) -> "ObservationTable":
        tables = [t for t in tables if len(t)]
        if not tables:
            return cls.empty()
        return cls(
            np.concatenate([t.size for t in tables]),
            np.concatenate([t.growth for t in tables]),
            np.concatenate([t.unit_count for t in tables]),
            np.concatenate([t.largest_unit for t in tables]),
        )


def as_table(obs) -> ObservationTable:
    """Accept an ObservationTable or any iterable of GrowthObservation."""
    if isinstance(obs, ObservationTable):
        return obs
    return ObservationTable.from_records(obs)
