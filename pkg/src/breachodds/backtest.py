"""Pointwise prediction bands from simulated paths and their coverage of
later observations."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .breach import BreachDistribution, breach_distribution, threshold_label
from .enso import select_regimes
from .errors import DomainError, ParseError
from .ingest import _lines, _parse_long_table, located
from .series import EnsembleDataset, MonthDate, MonthlySeries

DEFAULT_LEVELS = (0.95, 0.99)
MIN_PATHS = 100


def _futures(paths):
    series = [p.future if hasattr(p, "future") else p for p in paths]
    if not series:
        raise DomainError("no paths")
    start, n = series[0].start, len(series[0])
    for s in series[1:]:
        if s.start != start or len(s) != n:
            raise DomainError(f"paths cover different months: {s.start}+{len(s)} vs {start}+{n}")
    return start, np.vstack([s.values for s in series])


@dataclass(frozen=True, eq=False)
class Bands:
    """Per-month quantile bands. Row ``i`` of ``lower``/``upper`` belongs to
    ``levels[i]``."""

    start: MonthDate
    levels: tuple
    lower: np.ndarray
    upper: np.ndarray
    median: np.ndarray
    n_paths: int

    @property
    def n_months(self) -> int:
        return self.median.size

    @property
    def end(self) -> MonthDate:
        return self.start.shift(self.n_months - 1)

    def months(self) -> list[MonthDate]:
        return [self.start.shift(i) for i in range(self.n_months)]

    def band(self, level: float):
        i = self.levels.index(float(level))
        return self.lower[i], self.upper[i]

    def midline(self, level: float) -> np.ndarray:
        lo, hi = self.band(level)
        return 0.5 * (lo + hi)

    def to_csv(self, header_comments=()) -> str:
        buf = io.StringIO()
        for c in header_comments:
            buf.write(f"# {c}\n")
        w = csv.writer(buf, lineterminator="\n")
        cols = ["year", "month", "median"]
        for lv in self.levels:
            cols += [f"lower_{threshold_label(lv)}", f"upper_{threshold_label(lv)}"]
        w.writerow(cols)
        for j, d in enumerate(self.months()):
            row = [d.year, d.month, repr(float(self.median[j]))]
            for i in range(len(self.levels)):
                row += [repr(float(self.lower[i, j])), repr(float(self.upper[i, j]))]
            w.writerow(row)
        return buf.getvalue()


def prediction_bands(paths, levels=DEFAULT_LEVELS, min_paths: int = MIN_PATHS) -> Bands:
    """Empirical ``(1-L)/2`` and ``(1+L)/2`` quantiles across paths at each
    future month (linear interpolation between order statistics)."""
    paths = list(paths)
    if len(paths) < min_paths:
        raise DomainError(f"prediction bands need at least {min_paths} paths, got {len(paths)}")
    levels = tuple(sorted(float(lv) for lv in levels))
    if any(not 0 < lv < 1 for lv in levels):
        raise DomainError(f"levels must lie in (0, 1): {levels}")
    start, mat = _futures(paths)
    probs = [q for lv in levels for q in ((1 - lv) / 2, (1 + lv) / 2)]
    q = np.quantile(mat, probs + [0.5], axis=0, method="linear")
    lower, upper = q[0:-1:2], q[1:-1:2]
    return Bands(start, levels, lower, upper, q[-1], len(paths))


@dataclass(frozen=True, eq=False)
class CoverageReport:
    cutoff: MonthDate
    levels: tuple
    bands: Bands
    observed: MonthlySeries
    hit_rate: dict
    outside_months: dict

    def summary(self) -> dict:
        return {
            "cutoff": str(self.cutoff),
            "evaluated": f"{self.observed.start}..{self.observed.end}",
            "n_months": len(self.observed),
            "n_paths": self.bands.n_paths,
            "hit_rate": {str(lv): float(h) for lv, h in self.hit_rate.items()},
            "outside_months": {str(lv): [str(m) for m in ms] for lv, ms in self.outside_months.items()},
        }

    def to_csv(self, header_comments=()) -> str:
        buf = io.StringIO()
        for c in header_comments:
            buf.write(f"# {c}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["year", "month", "observed"] + [f"inside_{threshold_label(lv)}" for lv in self.levels])
        i0 = self.observed.start - self.bands.start
        for j, (d, v) in enumerate(zip(self.observed.dates(), self.observed.values)):
            row = [d.year, d.month, repr(float(v))]
            for lv in self.levels:
                lo, hi = self.bands.band(lv)
                row.append(int(lo[i0 + j] <= v <= hi[i0 + j]))
            w.writerow(row)
        return buf.getvalue()


def score_coverage(bands: Bands, observed: MonthlySeries) -> CoverageReport:
    """Share of observed months inside each band, plus the months outside."""
    lo_m, hi_m = max(bands.start, observed.start), min(bands.end, observed.end)
    if hi_m < lo_m:
        raise DomainError(
            f"observations {observed.start}..{observed.end} do not overlap bands {bands.start}..{bands.end}"
        )
    obs = observed.slice(lo_m, hi_m)
    i0 = lo_m - bands.start
    sl = slice(i0, i0 + len(obs))
    hit_rate, outside = {}, {}
    for lv in bands.levels:
        lo, hi = bands.band(lv)
        inside = (obs.values >= lo[sl]) & (obs.values <= hi[sl])
        hit_rate[lv] = float(inside.mean())
        outside[lv] = [lo_m.shift(int(j)) for j in np.flatnonzero(~inside)]
    return CoverageReport(bands.start.shift(-1), bands.levels, bands, obs, hit_rate, outside)


@dataclass(frozen=True, eq=False)
class OverlayReport:
    bands: Bands
    curves: dict = field(default_factory=dict)
    gaps: dict = field(default_factory=dict)

    @property
    def has_overlay(self) -> bool:
        return bool(self.curves)


def overlay_reference(bands: Bands, reference=None) -> OverlayReport:
    """Align externally supplied reference curves with the band months.

    ``reference`` is a series, a ``{name: series}`` mapping, or empty. For
    each curve and level the report holds the largest absolute monthly gap
    to the lower bound, upper bound and midline over the shared months.
    """
    if reference is None:
        return OverlayReport(bands)
    if isinstance(reference, MonthlySeries):
        reference = {reference.label or "reference": reference}
    if not reference:
        return OverlayReport(bands)
    curves, gaps = {}, {}
    for name, ref in reference.items():
        lo_m, hi_m = max(bands.start, ref.start), min(bands.end, ref.end)
        if hi_m < lo_m:
            raise DomainError(f"reference {name!r} ({ref.start}..{ref.end}) does not overlap "
                              f"bands {bands.start}..{bands.end}")
        r = ref.slice(lo_m, hi_m)
        i0 = lo_m - bands.start
        sl = slice(i0, i0 + len(r))
        curves[name] = r
        gaps[name] = {}
        for lv in bands.levels:
            lo, hi = bands.band(lv)
            gaps[name][lv] = {
                "lower": float(np.max(np.abs(r.values - lo[sl]))),
                "upper": float(np.max(np.abs(r.values - hi[sl]))),
                "midline": float(np.max(np.abs(r.values - 0.5 * (lo[sl] + hi[sl])))),
            }
    return OverlayReport(bands, curves, gaps)


def parse_reference_csv(content: str, source: str = "") -> dict:
    """Monthly reference curves: ``date,<name>[,<name>...]`` with ``YYYY-MM``
    dates. Returns ``{name: MonthlySeries}``."""
    with located(source):
        rows, _ = _lines(content)
        if not rows:
            return {}
        start, data, names = _parse_long_table(rows, source)
    if data.shape[0] == 0:
        raise ParseError("reference file has no rows", None, source)
    return {name: MonthlySeries(start, data[:, j], label=name) for j, name in enumerate(names)}


@dataclass(frozen=True, eq=False)
class BacktestResult:
    cutoff: MonthDate
    paths: list
    bands: Bands
    coverage: CoverageReport | None
    breach: BreachDistribution
    ms_k: int


def run_backtest(ensemble: EnsembleDataset, oni: MonthlySeries, config, cutoff: MonthDate,
                 levels=DEFAULT_LEVELS, workers: int = 1, observed: MonthlySeries | None = None,
                 ms=None) -> BacktestResult:
    """Refit and simulate with data up to and including ``cutoff``.

    ``ensemble`` must already be rebaselined. Observations default to the
    ensemble mean after the cutoff.
    """
    from .engine import FIT_SEED, fit_ensemble, simulate_paths

    if not ensemble.start < cutoff < ensemble.end:
        raise DomainError(f"cutoff {cutoff} must lie strictly inside {ensemble.start}..{ensemble.end}")
    train = ensemble.truncate(cutoff)
    oni_train = oni.slice(None, cutoff)
    if ms is None:
        ms = select_regimes(oni_train, config.regime_candidates, FIT_SEED)
    fits = fit_ensemble(train, oni_train, config, workers)
    paths = simulate_paths(train, oni_train, ms, config, fits, workers)
    bands = prediction_bands(paths, levels)
    if observed is None:
        observed = ensemble.mean_series("observed")
    coverage = None
    if observed.end > cutoff:
        coverage = score_coverage(bands, observed.slice(cutoff.shift(1), None))
    return BacktestResult(cutoff, paths, bands, coverage, breach_distribution(paths, config.thresholds), ms.k)
