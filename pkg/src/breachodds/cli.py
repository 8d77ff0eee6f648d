"""``breachodds`` command line.

Stages communicate through files in the output directory::

    ingest/    dataset.csv  oni.csv  manifest.json
    fits/      realization_000.json ...  ms_model.json  summary.json
    simulate/  breach.csv  paths_sample.csv  headline.txt  [paths.svg breach.svg]
    backtest-YYYY-MM/  bands.csv  coverage.csv  coverage.json  breach.csv  [bands.svg breach.svg]

Exit status: 0 on success, 1 when an estimation step fails, 2 for bad input
or configuration.
"""
from __future__ import annotations

import functools
import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import engine
from .backtest import overlay_reference, parse_reference_csv, run_backtest
from .breach import breach_distribution
from .config import ConfigError, RunConfig, check_horizon, file_sha256, load_config
from .enso import MsModel, select_regimes
from .errors import EstimationError, NumericalError, ParseError, StructuralError, DomainError
from .ingest import parse_ensemble_csv, parse_oni, serialize_ensemble_csv, serialize_series_csv
from .kernels import BACKEND

INPUT_ERRORS = (FileNotFoundError, IsADirectoryError, ConfigError, ParseError, StructuralError, DomainError)
ESTIMATION_ERRORS = (EstimationError, NumericalError)

_FIT_FIELDS = ("trend_candidates", "regime_candidates", "bandwidth_exponent", "oni_policy", "break_trim")
_INGEST_FIELDS = ("baseline_start", "baseline_end")


class _Failed(Exception):
    """Some units failed; artifacts for the rest were written."""


def _key(doc) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def ingest_key(cfg: RunConfig) -> str:
    fp = cfg.fingerprint()
    sc = fp["scenario"]
    return _key({"data": fp["data"], "baseline": {k: sc[k] for k in _INGEST_FIELDS}})


def fit_key(cfg: RunConfig) -> str:
    sc = cfg.fingerprint()["scenario"]
    return _key({"ingest": ingest_key(cfg), "fit": {k: sc[k] for k in _FIT_FIELDS}})


def _dump_json(path: Path, doc):
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _read_json(path: Path, stage: str):
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found; run `breachodds {stage}` first")
    return json.loads(path.read_text())


# ---------------------------------------------------------------- stages

def do_ingest(cfg: RunConfig) -> dict:
    cfg.check_inputs()
    raw = parse_ensemble_csv(cfg.temperature.read_text(), cfg.kind, str(cfg.temperature))
    oni = parse_oni(cfg.oni.read_text(), str(cfg.oni))
    check_horizon(cfg, raw.end)
    data = engine.prepare_ensemble(raw, cfg.scenario)
    shift = raw.matrix()[:, 0] - data.matrix()[:, 0]
    base = data[0].baseline
    out = cfg.output / "ingest"
    header = [cfg.manifest_line()]
    _write(out / "dataset.csv", serialize_ensemble_csv(data, header))
    _write(out / "oni.csv", serialize_series_csv(oni, header))
    manifest = {
        "config_sha256": cfg.sha256(),
        "master_seed": cfg.scenario.master_seed,
        "ingest_key": ingest_key(cfg),
        "kind": cfg.kind,
        "sources": {
            "temperature": {"name": cfg.temperature.name, "sha256": file_sha256(cfg.temperature)},
            "oni": {"name": cfg.oni.name, "sha256": file_sha256(cfg.oni)},
        },
        "n_realizations": len(data),
        "span": {"start": str(data.start), "end": str(data.end), "n_months": len(data[0])},
        "oni_span": {"start": str(oni.start), "end": str(oni.end), "n_months": len(oni)},
        "baseline": {"start": str(base.start), "end": str(base.end), "description": base.description},
        "native_baseline": {"start": str(raw[0].baseline.start), "end": str(raw[0].baseline.end),
                            "description": raw[0].baseline.description},
        "baseline_shift": {"mean": float(shift.mean()), "min": float(shift.min()), "max": float(shift.max())},
    }
    _dump_json(out / "manifest.json", manifest)
    click.echo(f"{len(data)} realization(s), {data.start}..{data.end} ({len(data[0])} months)")
    click.echo(f"ONI {oni.start}..{oni.end}")
    click.echo(f"rebaselined to {base.start}..{base.end}: anomalies lowered by "
               f"{shift.mean():+.4f} degC on average (range {shift.min():+.4f}..{shift.max():+.4f})")
    return manifest


def load_ingested(cfg: RunConfig):
    out = cfg.output / "ingest"
    manifest = _read_json(out / "manifest.json", "ingest")
    if manifest.get("ingest_key") != ingest_key(cfg):
        raise ConfigError(f"{out} was produced from different inputs or baseline; rerun `breachodds ingest`")
    data = parse_ensemble_csv((out / "dataset.csv").read_text(), "hadcrut-ensemble", str(out / "dataset.csv"))
    oni = parse_oni((out / "oni.csv").read_text(), str(out / "oni.csv"))
    return data, oni


def do_fit(cfg: RunConfig, workers: int = 1) -> dict:
    data, oni = load_ingested(cfg)
    out = cfg.output / "fits"
    out.mkdir(parents=True, exist_ok=True)
    for stale in out.glob("realization_*.json"):
        stale.unlink()
    results = engine.fit_ensemble(data, oni, cfg.scenario, workers, collect_errors=True)
    failed, kinds, ds = [], {}, []
    for rid, res in enumerate(results):
        if isinstance(res, Exception):
            failed.append(rid)
            click.echo(f"error: {res}", err=True)
            continue
        _dump_json(out / f"realization_{rid:03d}.json", res.to_dict())
        kinds[str(res.trend.kind.name)] = kinds.get(str(res.trend.kind.name), 0) + 1
        ds.append(res.memory.d)
    ms_err = None
    try:
        ms = select_regimes(oni, cfg.scenario.regime_candidates, engine.FIT_SEED)
        _dump_json(out / "ms_model.json", ms.to_dict())
    except ESTIMATION_ERRORS as exc:
        ms, ms_err = None, str(exc)
        click.echo(f"error: ONI regime model: {exc}", err=True)
    summary = {
        "config_sha256": cfg.sha256(),
        "fit_key": fit_key(cfg),
        "n_realizations": len(results),
        "failed": failed,
        "trend_kinds": kinds,
        "d": _quantiles(ds),
        "ms": ({"k": ms.k, "loglik": ms.loglik, "aic": ms.aic, "bic": ms.bic,
                "selection": ms.diagnostics.get("selection")} if ms is not None else {"error": ms_err}),
    }
    _dump_json(out / "summary.json", summary)
    click.echo(f"fitted {len(results) - len(failed)}/{len(results)} realization(s)")
    for name in sorted(kinds):
        click.echo(f"  {name:<10} {kinds[name]}")
    if ds:
        q = summary["d"]
        click.echo(f"  d: min {q['min']:.4f}  median {q['median']:.4f}  max {q['max']:.4f}")
    if ms is not None:
        click.echo(f"ONI regimes: k = {ms.k} (AIC {ms.aic:.2f}, BIC {ms.bic:.2f})")
    if failed or ms is None:
        raise _Failed(f"{len(failed)} realization fit(s) failed" + ("; ONI model failed" if ms is None else ""))
    return summary


def _quantiles(values) -> dict:
    if not values:
        return {}
    v = np.asarray(values)
    q = np.quantile(v, [0, 0.25, 0.5, 0.75, 1])
    return {"min": float(q[0]), "q25": float(q[1]), "median": float(q[2]), "q75": float(q[3]),
            "max": float(q[4]), "mean": float(v.mean())}


def load_fits(cfg: RunConfig, n: int):
    out = cfg.output / "fits"
    summary = _read_json(out / "summary.json", "fit")
    if summary.get("fit_key") != fit_key(cfg):
        raise ConfigError(f"{out} is stale for this configuration; rerun `breachodds fit`")
    if summary["failed"] or "error" in summary["ms"]:
        raise EstimationError(f"fit stage had failures (realizations {summary['failed']}); "
                              "fix them before simulating")
    fits = [engine.RealizationFit.from_dict(_read_json(out / f"realization_{i:03d}.json", "fit"))
            for i in range(n)]
    ms = MsModel.from_dict(_read_json(out / "ms_model.json", "fit"))
    return fits, ms


def do_simulate(cfg: RunConfig, workers: int = 1):
    data, oni = load_ingested(cfg)
    fits, ms = load_fits(cfg, len(data))
    paths = engine.simulate_paths(data, oni, ms, cfg.scenario, fits, workers)
    dist = breach_distribution(paths, cfg.scenario.thresholds)
    out = cfg.output / "simulate"
    header = [cfg.manifest_line()]
    _write(out / "breach.csv", dist.to_csv(header))
    sample = engine.sample_paths(paths, cfg.paths_sample, cfg.scenario.master_seed)
    _write(out / "paths_sample.csv", engine.paths_to_csv(sample, header))
    lines = dist.headline_lines()
    _write(out / "headline.txt", "\n".join(lines) + "\n")
    if cfg.svg:
        from .plotting import plot_breach, plot_paths

        plot_paths(sample, out / "paths.svg", data.mean_series("ensemble mean"), cfg.scenario.thresholds)
        plot_breach(dist, out / "breach.svg")
    click.echo(f"{len(paths)} paths ({len(data)} realizations x {cfg.scenario.enso_paths_per_realization})")
    for line in lines:
        click.echo(line)
    return dist


def do_backtest(cfg: RunConfig, workers: int = 1):
    if cfg.cutoff is None:
        raise ConfigError("backtest needs a cutoff (--cutoff YYYY-MM or [backtest] cutoff)")
    data, oni = load_ingested(cfg)
    cutoff = cfg.cutoff
    if not data.start < cutoff < data.end:
        raise ConfigError(f"cutoff {cutoff} must lie strictly inside the data span {data.start}..{data.end}")
    if cutoff - data.start + 1 < engine.MIN_HISTORY_MONTHS:
        raise ConfigError(f"cutoff {cutoff} leaves {cutoff - data.start + 1} training months; "
                          f"need >= {engine.MIN_HISTORY_MONTHS}")
    check_horizon(cfg, cutoff)
    if oni.start > cutoff:
        raise ConfigError(f"ONI starts {oni.start}, after cutoff {cutoff}")
    reference = None
    if cfg.ipcc_overlay is not None:
        reference = parse_reference_csv(cfg.ipcc_overlay.read_text(), str(cfg.ipcc_overlay))
    res = run_backtest(data, oni, cfg.scenario, cutoff, cfg.levels, workers)
    overlay = overlay_reference(res.bands, reference)
    out = cfg.output / f"backtest-{cutoff}"
    header = [cfg.manifest_line()]
    _write(out / "bands.csv", res.bands.to_csv(header))
    _write(out / "breach.csv", res.breach.to_csv(header))
    summary = {"config_sha256": cfg.sha256(), "master_seed": cfg.scenario.master_seed, "ms_k": res.ms_k,
               "headline": res.breach.headline_lines()}
    if res.coverage is not None:
        _write(out / "coverage.csv", res.coverage.to_csv(header))
        summary["coverage"] = res.coverage.summary()
    if overlay.has_overlay:
        summary["overlay_gaps"] = {name: {str(lv): g for lv, g in per.items()}
                                   for name, per in overlay.gaps.items()}
    _dump_json(out / "coverage.json", summary)
    if cfg.svg:
        from .plotting import plot_bands, plot_breach

        observed = res.coverage.observed if res.coverage is not None else None
        plot_bands(res.bands, out / "bands.svg", observed, overlay if overlay.has_overlay else None)
        plot_breach(res.breach, out / "breach.svg", f"Breach share, data to {cutoff}")
    click.echo(f"backtest with data to {cutoff}: {res.bands.n_paths} paths, ONI regimes k = {res.ms_k}")
    if res.coverage is not None:
        for lv, rate in res.coverage.hit_rate.items():
            n_out = len(res.coverage.outside_months[lv])
            click.echo(f"  {lv:.0%} band: hit rate {rate:.3f}, {n_out} month(s) outside")
    for line in res.breach.headline_lines():
        click.echo(line)
    return res


# ---------------------------------------------------------------- click wiring

def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            fn(*args, **kwargs)
        except INPUT_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except ESTIMATION_ERRORS as exc:
            click.echo(f"estimation failed: {exc}", err=True)
            sys.exit(1)
        except _Failed as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
    return wrapper


def _common(fn):
    opts = [
        click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
                     help="TOML run configuration."),
        click.option("--workers", default=1, show_default=True, type=click.IntRange(1),
                     help="Worker processes for fitting and simulation."),
        click.option("--seed", type=int, default=None, help="Override the master seed."),
        click.option("--output", type=click.Path(file_okay=False), default=None,
                     help="Override the output directory."),
        click.option("--svg", is_flag=True, default=False, help="Also write SVG figures."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _load(config_path, seed, output, svg, cutoff=None) -> RunConfig:
    return load_config(config_path).override(seed=seed, cutoff=cutoff, output=output, svg=svg)


@click.group()
@click.version_option(package_name="artifact", message=f"%(prog)s %(version)s ({BACKEND} kernels)")
def cli():
    """Probabilities that simulated global temperature paths breach 1.5 and 2 degC."""


@cli.command()
@_common
@_guarded
def ingest(config_path, workers, seed, output, svg):
    """Parse and rebaseline the input data."""
    do_ingest(_load(config_path, seed, output, svg))


@cli.command()
@_common
@_guarded
def fit(config_path, workers, seed, output, svg):
    """Fit trend, memory and ONI regime models."""
    do_fit(_load(config_path, seed, output, svg), workers)


@cli.command()
@_common
@_guarded
def simulate(config_path, workers, seed, output, svg):
    """Simulate paths and compute breach probabilities."""
    do_simulate(_load(config_path, seed, output, svg), workers)


@cli.command()
@_common
@click.option("--cutoff", default=None, help="Last training month, YYYY-MM.")
@_guarded
def backtest(config_path, workers, seed, output, svg, cutoff):
    """Refit on data up to a cutoff and score later observations."""
    do_backtest(_load(config_path, seed, output, svg, cutoff), workers)


@cli.command()
@_common
@click.option("--cutoff", default=None, help="Also backtest at this month.")
@_guarded
def run(config_path, workers, seed, output, svg, cutoff):
    """ingest, fit and simulate; backtest too when a cutoff is configured."""
    cfg = _load(config_path, seed, output, svg, cutoff)
    do_ingest(cfg)
    do_fit(cfg, workers)
    do_simulate(cfg, workers)
    if cfg.cutoff is not None:
        do_backtest(cfg, workers)


def main(argv=None):
    cli.main(args=argv, prog_name="breachodds")


if __name__ == "__main__":
    main()
