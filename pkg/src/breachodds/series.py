"""Monthly calendar index and the immutable monthly series container."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import total_ordering

import numpy as np

from .errors import DomainError, StructuralError

_MONTH_RE = re.compile(r"^\s*(-?\d{1,4})[-/](\d{1,2})\s*$")


@total_ordering
@dataclass(frozen=True)
class MonthDate:
    """A calendar month. Ordered chronologically."""

    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise DomainError(f"month must be in 1..12, got {self.month}")

    @classmethod
    def parse(cls, text: str) -> "MonthDate":
        """Parse ``YYYY-MM`` (``YYYY/MM`` also accepted)."""
        m = _MONTH_RE.match(str(text))
        if m is None:
            raise DomainError(f"not a YYYY-MM month: {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def from_ordinal(cls, n: int) -> "MonthDate":
        y, m = divmod(int(n), 12)
        return cls(y, m + 1)

    @property
    def ordinal(self) -> int:
        """Months since year 0, January; consecutive months differ by one."""
        return self.year * 12 + self.month - 1

    def shift(self, months: int) -> "MonthDate":
        return MonthDate.from_ordinal(self.ordinal + months)

    def __sub__(self, other: "MonthDate") -> int:
        return self.ordinal - other.ordinal

    def __lt__(self, other):
        if not isinstance(other, MonthDate):
            return NotImplemented
        return self.ordinal < other.ordinal

    def __str__(self):
        return f"{self.year:04d}-{self.month:02d}"


@dataclass(frozen=True)
class BaselineSpec:
    """Reference window whose mean defines zero anomaly."""

    start: MonthDate
    end: MonthDate
    description: str = ""

    def __post_init__(self):
        if self.end < self.start:
            raise DomainError(f"baseline start {self.start} is after end {self.end}")

    @property
    def n_months(self) -> int:
        return self.end - self.start + 1


NATIVE = BaselineSpec(MonthDate(1, 1), MonthDate(1, 1), "native")

# Native reference periods shipped with the products.
HADCRUT5_BASELINE = BaselineSpec(MonthDate(1961, 1), MonthDate(1990, 12), "1961-1990 (HadCRUT5 native)")
GISTEMP_BASELINE = BaselineSpec(MonthDate(1951, 1), MonthDate(1980, 12), "1951-1980 (GISTEMP native)")


def preindustrial_baseline(series_start: MonthDate, end: MonthDate = MonthDate(1900, 12)) -> BaselineSpec:
    """Window from the first available month up to ``end`` (default 1900-12)."""
    return BaselineSpec(series_start, end, f"pre-industrial {series_start}..{end}")


@dataclass(frozen=True, eq=False)
class MonthlySeries:
    """Contiguous monthly values starting at ``start``.

    ``values`` is stored as a read-only float64 array; the end date follows
    from its length.
    """

    start: MonthDate
    values: np.ndarray
    baseline: BaselineSpec = NATIVE
    label: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if v.size == 0:
            raise StructuralError(f"series {self.label!r} is empty")
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise StructuralError(
                f"series {self.label!r} has a non-finite value at {self.start.shift(bad)}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    @property
    def end(self) -> MonthDate:
        return self.start.shift(len(self) - 1)

    def dates(self) -> list[MonthDate]:
        return [self.start.shift(i) for i in range(len(self))]

    def index_of(self, date: MonthDate) -> int:
        """Position of ``date``; raises if it is outside the series."""
        i = date - self.start
        if not 0 <= i < len(self):
            raise DomainError(f"{date} is outside {self.start}..{self.end}")
        return i

    def slice(self, start: MonthDate | None = None, end: MonthDate | None = None) -> "MonthlySeries":
        """Sub-series over ``[start, end]`` clipped to the available span."""
        s = self.start if start is None else max(start, self.start)
        e = self.end if end is None else min(end, self.end)
        if e < s:
            raise DomainError(f"empty slice {start}..{end} of {self.start}..{self.end}")
        i0, i1 = s - self.start, e - self.start + 1
        return MonthlySeries(s, self.values[i0:i1], self.baseline, self.label)

    def with_values(self, values, baseline: BaselineSpec | None = None, label: str | None = None):
        return MonthlySeries(
            self.start,
            values,
            self.baseline if baseline is None else baseline,
            self.label if label is None else label,
        )

    def __eq__(self, other):
        if not isinstance(other, MonthlySeries):
            return NotImplemented
        return (
            self.start == other.start
            and self.baseline == other.baseline
            and self.label == other.label
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __repr__(self):
        return f"MonthlySeries({self.label!r}, {self.start}..{self.end}, n={len(self)})"


@dataclass(frozen=True)
class EnsembleDataset:
    """Equal-length realizations of the same quantity."""

    realizations: tuple
    source: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        reals = tuple(self.realizations)
        if not reals:
            raise StructuralError("ensemble has no realizations")
        first = reals[0]
        for r in reals[1:]:
            if r.start != first.start or len(r) != len(first):
                raise StructuralError(
                    f"realization {r.label!r} spans {r.start}..{r.end}, "
                    f"expected {first.start}..{first.end}"
                )
        object.__setattr__(self, "realizations", reals)

    def __len__(self):
        return len(self.realizations)

    def __getitem__(self, i) -> MonthlySeries:
        return self.realizations[i]

    def __iter__(self):
        return iter(self.realizations)

    @property
    def start(self) -> MonthDate:
        return self.realizations[0].start

    @property
    def end(self) -> MonthDate:
        return self.realizations[0].end

    def matrix(self) -> np.ndarray:
        """Values as an array of shape (n_realizations, n_months)."""
        return np.vstack([r.values for r in self.realizations])

    def mean_series(self, label: str = "ensemble mean") -> MonthlySeries:
        r0 = self.realizations[0]
        return MonthlySeries(r0.start, self.matrix().mean(axis=0), r0.baseline, label)

    def map(self, fn) -> "EnsembleDataset":
        return EnsembleDataset(tuple(fn(r) for r in self.realizations), self.source, dict(self.meta))

    def truncate(self, end: MonthDate) -> "EnsembleDataset":
        return self.map(lambda r: r.slice(None, end))
