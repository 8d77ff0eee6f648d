"""Monte Carlo orchestration: per-realization fitting and path simulation.

Every simulated path is a function of ``(master_seed, realization_id,
scenario_id)`` only. Each unit draws from three independent generators
(coefficients, ONI, error innovations) seeded through ``numpy``'s
``SeedSequence``, so results do not depend on the worker count or the
execution order.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .enso import DEFAULT_REGIMES, MsModel, simulate_oni
from .errors import BreachOddsError, DomainError, EstimationError
from .ingest import ALIGN_POLICIES, align, rebaseline_ensemble
from .longmem import (
    DEFAULT_BANDWIDTH_EXPONENT,
    DEFAULT_TRUNCATION,
    MemoryEstimate,
    default_bandwidth,
    estimate_d,
    forecast_error,
    innovation_variance,
)
from .series import BaselineSpec, EnsembleDataset, MonthDate, MonthlySeries, preindustrial_baseline
from .trend import (
    BROKEN,
    DEFAULT_TRIM,
    TREND_NAMES,
    TrendFit,
    TrendKind,
    estimate_break,
    fit_trend,
    sample_coefficients,
    select_model,
    trend_mean_path,
)

MIN_HORIZON = 240
MIN_HISTORY_MONTHS = 40 * 12
BETA_SHARING = ("per-scenario", "per-realization")

STREAM_BETA, STREAM_ONI, STREAM_ERROR, STREAM_BETA_SHARED, STREAM_SAMPLE = range(5)
# EM restarts use a fixed seed so fitted models do not move with the simulation seed
FIT_SEED = 0


@dataclass(frozen=True)
class ScenarioConfig:
    """Simulation settings. By default each realization gets 5 ENSO paths
    and the regime count is chosen from {3, 5, 7}."""

    enso_paths_per_realization: int = 5
    horizon_end: MonthDate = MonthDate(2100, 12)
    master_seed: int = 20161104
    trend_candidates: tuple = TREND_NAMES
    regime_candidates: tuple = DEFAULT_REGIMES
    bandwidth_exponent: float = DEFAULT_BANDWIDTH_EXPONENT
    baseline_start: MonthDate | None = None
    baseline_end: MonthDate = MonthDate(1900, 12)
    thresholds: tuple = (1.5, 2.0)
    beta_sharing: str = "per-scenario"
    oni_policy: str = "neutral-zero"
    break_trim: float = DEFAULT_TRIM
    ar_truncation: int = DEFAULT_TRUNCATION

    def __post_init__(self):
        if self.enso_paths_per_realization < 1:
            raise DomainError("enso_paths_per_realization must be >= 1")
        if self.beta_sharing not in BETA_SHARING:
            raise DomainError(f"beta_sharing must be one of {BETA_SHARING}")
        if self.oni_policy not in ALIGN_POLICIES:
            raise DomainError(f"oni_policy must be one of {ALIGN_POLICIES}")
        bad = [t for t in self.trend_candidates if t not in TREND_NAMES]
        if bad or not self.trend_candidates:
            raise DomainError(f"trend candidates must be a non-empty subset of {TREND_NAMES}, got {bad}")
        if not self.thresholds:
            raise DomainError("at least one threshold is required")
        object.__setattr__(self, "trend_candidates", tuple(self.trend_candidates))
        object.__setattr__(self, "regime_candidates", tuple(int(k) for k in self.regime_candidates))
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))

    def horizon(self, history_end: MonthDate) -> int:
        """Months from the one after ``history_end`` through ``horizon_end``."""
        h = self.horizon_end - history_end
        if h < MIN_HORIZON:
            raise DomainError(
                f"horizon of {h} months after {history_end} is shorter than {MIN_HORIZON}; "
                f"extend horizon_end past {history_end.shift(MIN_HORIZON)}"
            )
        return h

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = str(v) if isinstance(v, MonthDate) else (list(v) if isinstance(v, tuple) else v)
        return out


def baseline_for(config: ScenarioConfig, data_start: MonthDate) -> BaselineSpec:
    """Pre-industrial window: ``baseline_start`` (default: first month of
    data) through ``baseline_end``."""
    if config.baseline_start is None:
        return preindustrial_baseline(data_start, config.baseline_end)
    return BaselineSpec(config.baseline_start, config.baseline_end,
                        f"pre-industrial {config.baseline_start}..{config.baseline_end}")


def prepare_ensemble(ensemble: EnsembleDataset, config: ScenarioConfig) -> EnsembleDataset:
    """Rebaseline every realization to the configured pre-industrial window."""
    return rebaseline_ensemble(ensemble, baseline_for(config, ensemble.start))


def unit_rng(master_seed: int, realization_id: int, scenario_id: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(realization_id),
                                                          int(scenario_id), int(stream)]))


@dataclass(frozen=True, eq=False)
class RealizationFit:
    """Selected trend model and memory estimate for one realization."""

    realization_id: int
    trend: TrendFit
    memory: MemoryEstimate
    innovation_var: float

    def to_dict(self) -> dict:
        return {
            "realization_id": self.realization_id,
            "trend": self.trend.to_dict(),
            "memory": self.memory.to_dict(),
            "innovation_var": float(self.innovation_var),
        }

    @classmethod
    def from_dict(cls, doc) -> "RealizationFit":
        return cls(int(doc["realization_id"]), TrendFit.from_dict(doc["trend"]),
                   MemoryEstimate.from_dict(doc["memory"]), float(doc["innovation_var"]))


def fit_realization(series: MonthlySeries, oni: MonthlySeries, config: ScenarioConfig,
                    realization_id: int = 0) -> RealizationFit:
    """Fit all trend candidates, keep the best, estimate ``d`` on its residuals."""
    try:
        panel = align(series, oni, config.oni_policy)
        if len(panel) < MIN_HISTORY_MONTHS:
            raise DomainError(f"history of {len(panel)} months is shorter than 40 years")
        fits = []
        for name in config.trend_candidates:
            kind = TrendKind(name)
            if name == BROKEN:
                kind = TrendKind.broken(estimate_break(panel, config.break_trim))
            fits.append(fit_trend(kind, panel))
        best = select_model(fits)
        resid = best.residuals.values
        mem = estimate_d(resid, default_bandwidth(resid.size, config.bandwidth_exponent))
        ivar = innovation_variance(resid, mem.d)
    except BreachOddsError as exc:
        raise EstimationError(f"realization {realization_id}: {exc}") from exc
    return RealizationFit(realization_id, best, mem, ivar)


def _fit_one(args):
    series, oni, config, rid = args
    try:
        return rid, fit_realization(series, oni, config, rid)
    except EstimationError as exc:
        return rid, exc


def fit_ensemble(ensemble: EnsembleDataset, oni: MonthlySeries, config: ScenarioConfig,
                 workers: int = 1, collect_errors: bool = False):
    """Fit every realization. Returns a list ordered by realization id.

    With ``collect_errors`` failed realizations appear as their
    :class:`EstimationError` instead of aborting the run.
    """
    jobs = [(r, oni, config, i) for i, r in enumerate(ensemble)]
    results = dict(_map(_fit_one, jobs, workers))
    out = [results[i] for i in range(len(jobs))]
    if not collect_errors:
        for item in out:
            if isinstance(item, Exception):
                raise item
    return out


@dataclass(frozen=True, eq=False)
class SimulatedPath:
    """Observed history plus one simulated future.

    ``components`` holds the trend, ENSO and long-memory parts whose sum is
    ``future``.
    """

    realization_id: int
    scenario_id: int
    history: MonthlySeries
    future: MonthlySeries
    components: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def combined(self) -> MonthlySeries:
        return MonthlySeries(self.history.start, np.concatenate([self.history.values, self.future.values]),
                             self.history.baseline, f"r{self.realization_id}s{self.scenario_id}")


def simulate_unit(realization_id: int, scenario_id: int, history: MonthlySeries, fit: RealizationFit,
                  ms: MsModel, config: ScenarioConfig, horizon: int) -> SimulatedPath:
    """One (realization, scenario) path."""
    seed = config.master_seed
    trend = fit.trend
    if config.beta_sharing == "per-scenario":
        beta = sample_coefficients(trend, unit_rng(seed, realization_id, scenario_id, STREAM_BETA))
    else:
        beta = sample_coefficients(trend, unit_rng(seed, realization_id, 0, STREAM_BETA_SHARED))
    start = history.end.shift(1)
    oni = simulate_oni(ms, horizon, unit_rng(seed, realization_id, scenario_id, STREAM_ONI), start)
    trend_part = trend_mean_path(trend, beta, horizon, np.zeros(horizon)).values
    enso_part = beta[-1] * oni.values
    resid = trend.residuals.values
    err = forecast_error(resid, fit.memory.d, fit.innovation_var, horizon,
                         truncation=min(config.ar_truncation, resid.size),
                         rng=unit_rng(seed, realization_id, scenario_id, STREAM_ERROR))
    future = MonthlySeries(start, trend_part + enso_part + err, history.baseline, "simulated")
    return SimulatedPath(
        realization_id, scenario_id, history, future,
        {"trend": trend_part, "enso": enso_part, "error": err, "oni": oni.values},
        {"trend_kind": str(trend.kind), "beta": [float(b) for b in beta], "d": fit.memory.d,
         "seed": [int(seed), int(realization_id), int(scenario_id)]},
    )


def _simulate_realization(args):
    rid, history, fit, ms, config, horizon = args
    try:
        return [simulate_unit(rid, sid, history, fit, ms, config, horizon)
                for sid in range(config.enso_paths_per_realization)]
    except BreachOddsError as exc:
        raise EstimationError(f"realization {rid}: {exc}") from exc


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def simulate_paths(ensemble: EnsembleDataset, oni: MonthlySeries, ms: MsModel, config: ScenarioConfig,
                   fits=None, workers: int = 1) -> list[SimulatedPath]:
    """All ``len(ensemble) * enso_paths_per_realization`` paths, ordered by
    ``(realization_id, scenario_id)``."""
    if len(ensemble) == 0:
        raise DomainError("empty ensemble")
    if fits is None:
        fits = fit_ensemble(ensemble, oni, config, workers)
    if len(fits) != len(ensemble):
        raise DomainError(f"{len(fits)} fits for {len(ensemble)} realizations")
    jobs = []
    for rid, (series, fit) in enumerate(zip(ensemble, fits)):
        history = series.slice(fit.trend.start, fit.trend.end)
        jobs.append((rid, history, fit, ms, config, config.horizon(history.end)))
    paths = [p for chunk in _map(_simulate_realization, jobs, workers) for p in chunk]
    paths.sort(key=lambda p: (p.realization_id, p.scenario_id))
    return paths


PATH_COLUMNS = ("realization_id", "scenario_id", "year", "month", "anomaly", "is_future")


def sample_paths(paths, n: int = 100, seed: int = 0):
    """Deterministic subset of ``n`` paths (all of them if fewer)."""
    paths = list(paths)
    if n >= len(paths):
        return paths
    rng = unit_rng(seed, 0, 0, STREAM_SAMPLE)
    idx = np.sort(rng.choice(len(paths), size=n, replace=False))
    return [paths[i] for i in idx]


def paths_to_csv(paths, header_comments=(), include_history: bool = True) -> str:
    buf = io.StringIO()
    for c in header_comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PATH_COLUMNS)
    for p in paths:
        parts = [(p.future, 1)]
        if include_history:
            parts.insert(0, (p.history, 0))
        for series, flag in parts:
            for d, v in zip(series.dates(), series.values):
                w.writerow((p.realization_id, p.scenario_id, d.year, d.month, repr(float(v)), flag))
    return buf.getvalue()


def with_seed(config: ScenarioConfig, seed: int) -> ScenarioConfig:
    return replace(config, master_seed=int(seed))
