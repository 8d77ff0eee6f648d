"""Centered 20-year means, first-breach detection and breach curves."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .series import MonthDate, MonthlySeries

WINDOW = 240
HALF = WINDOW // 2


def _as_series(path) -> MonthlySeries:
    return path.combined() if hasattr(path, "combined") else path


def centered_ma_240(path) -> MonthlySeries:
    """240-month mean centred on each month.

    The value at month ``t`` averages months ``t-120 .. t+119``; it exists
    only where that whole window is available, so a series starting in
    2004-01 gets its first value at 2014-01.
    """
    s = _as_series(path)
    x = s.values
    if x.size < WINDOW:
        raise DomainError(f"need at least {WINDOW} months for a 20-year mean, got {x.size}")
    c = np.concatenate(([0.0], np.cumsum(x)))
    ma = (c[WINDOW:] - c[:-WINDOW]) / WINDOW
    return MonthlySeries(s.start.shift(HALF), ma, s.baseline, f"{s.label} 20y centred mean".strip())


def first_breach(ma: MonthlySeries, threshold: float) -> MonthDate | None:
    """Earliest month with ``ma >= threshold``; ``None`` if never."""
    idx = np.flatnonzero(ma.values >= threshold)
    return ma.start.shift(int(idx[0])) if idx.size else None


def threshold_label(t: float) -> str:
    """``1.5 -> "1p5"``, ``2.0 -> "2p0"``."""
    text = f"{t:.1f}" if round(t, 1) == t else repr(float(t))
    return text.replace("-", "m").replace(".", "p")


@dataclass(frozen=True, eq=False)
class BreachDistribution:
    """Cumulative share of paths whose centred mean has reached each
    threshold, month by month. ``counts[i, t]`` paths out of ``n_paths``."""

    start: MonthDate
    thresholds: tuple
    counts: np.ndarray
    n_paths: int

    @property
    def prob(self) -> np.ndarray:
        return self.counts / self.n_paths

    @property
    def n_months(self) -> int:
        return self.counts.shape[1]

    def months(self) -> list[MonthDate]:
        return [self.start.shift(i) for i in range(self.n_months)]

    def curve(self, threshold: float) -> MonthlySeries:
        i = self.thresholds.index(float(threshold))
        return MonthlySeries(self.start, self.prob[i], label=f"P(breach {threshold})")

    def first_month_at_least(self, threshold: float, level: float) -> MonthDate | None:
        i = self.thresholds.index(float(threshold))
        idx = np.flatnonzero(self.counts[i] >= level * self.n_paths - 1e-9)
        return self.start.shift(int(idx[0])) if idx.size else None

    def first_nonzero(self, threshold: float) -> MonthDate | None:
        i = self.thresholds.index(float(threshold))
        idx = np.flatnonzero(self.counts[i] > 0)
        return self.start.shift(int(idx[0])) if idx.size else None

    def headline(self) -> dict:
        """First month with P > 0, P >= 0.5 and P >= 0.99 per threshold."""
        out = {}
        for t in self.thresholds:
            out[t] = {
                "first_nonzero": self.first_nonzero(t),
                "p50": self.first_month_at_least(t, 0.5),
                "p99": self.first_month_at_least(t, 0.99),
            }
        return out

    def headline_lines(self) -> list[str]:
        end = self.start.shift(self.n_months - 1)
        lines = []
        for t, marks in self.headline().items():
            for key, text in (("first_nonzero", ">0"), ("p50", ">=0.5"), ("p99", ">=0.99")):
                m = marks[key]
                when = f"by {m}" if m is not None else f"not reached by {end}"
                lines.append(f"P({t:g}°C){text} {when}")
        return lines

    def to_csv(self, header_comments=()) -> str:
        buf = io.StringIO()
        for c in header_comments:
            buf.write(f"# {c}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["year", "month"] + [f"prob_{threshold_label(t)}" for t in self.thresholds] + ["n_paths"])
        probs = self.prob
        for j, d in enumerate(self.months()):
            w.writerow([d.year, d.month] + [repr(float(p)) for p in probs[:, j]] + [self.n_paths])
        return buf.getvalue()


def first_breach_indices(mas, thresholds) -> np.ndarray:
    """Index of first breach per (threshold, path); ``n_months`` if never."""
    mat = np.vstack([m.values for m in mas])
    n = mat.shape[1]
    out = np.empty((len(thresholds), mat.shape[0]), dtype=np.int64)
    for i, t in enumerate(thresholds):
        hit = mat >= t
        out[i] = np.where(hit.any(axis=1), hit.argmax(axis=1), n)
    return out


def breach_distribution(paths, thresholds=(1.5, 2.0)) -> BreachDistribution:
    """Aggregate paths into cumulative breach proportions."""
    paths = list(paths)
    if not paths:
        raise DomainError("breach_distribution needs at least one path")
    thresholds = tuple(float(t) for t in thresholds)
    mas = [centered_ma_240(p) for p in paths]
    start, n = mas[0].start, len(mas[0])
    for m in mas[1:]:
        if m.start != start or len(m) != n:
            raise DomainError(f"paths cover different months: {m.start}+{len(m)} vs {start}+{n}")
    first = first_breach_indices(mas, thresholds)
    counts = np.empty((len(thresholds), n), dtype=np.int64)
    for i in range(len(thresholds)):
        counts[i] = np.cumsum(np.bincount(first[i], minlength=n + 1)[:n])
    counts.setflags(write=False)
    return BreachDistribution(start, thresholds, counts, len(paths))
