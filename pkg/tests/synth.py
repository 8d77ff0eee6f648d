"""Synthetic ensembles and ONI series for tests."""
from __future__ import annotations

import numpy as np

from breachodds.ingest import serialize_ensemble_csv, serialize_series_csv
from breachodds.longmem import fracdiff
from breachodds.series import EnsembleDataset, MonthDate, MonthlySeries


def oni_series(start=MonthDate(1950, 1), end=MonthDate(2020, 12), seed=1) -> MonthlySeries:
    rng = np.random.default_rng(seed)
    n = end - start + 1
    x = np.empty(n)
    x[0] = 0.0
    for t in range(1, n):
        x[t] = 0.93 * x[t - 1] + 0.3 * rng.standard_normal()
    return MonthlySeries(start, np.round(x, 2), label="ONI")


def ensemble(n_real=3, start=MonthDate(1850, 1), end=MonthDate(2020, 12), seed=7, oni=None,
             d=0.3, noise=0.1) -> EnsembleDataset:
    """Level-shift trend anomalies with an ONI term and fractionally integrated noise."""
    oni = oni if oni is not None else oni_series(seed=seed + 100)
    n = end - start + 1
    t = np.arange(1, n + 1) / n
    kink = (MonthDate(1975, 1) - start) / n
    base = -0.3 + 1.6 * t + 0.3 * (t > kink)
    x_oni = np.zeros(n)
    i0 = oni.start - start
    x_oni[i0:i0 + len(oni)] = oni.values[: n - i0]
    rng = np.random.default_rng(seed)
    common = fracdiff(rng.standard_normal(n), -d) * noise
    reals = []
    for r in range(n_real):
        jitter = 0.01 * rng.standard_normal(n)
        reals.append(MonthlySeries(start, base + 0.08 * x_oni + common + jitter, label=f"Realization {r + 1}"))
    return EnsembleDataset(tuple(reals), "synthetic", {"kind": "hadcrut-ensemble"})


def write_inputs(tmp_path, n_real=3, seed=7, paths_per=5, extra="", oni_end=MonthDate(2020, 12)):
    """Write temperature, ONI and config files; return the config path."""
    oni = oni_series(end=oni_end, seed=seed + 100)
    data = ensemble(n_real, seed=seed, oni=oni)
    (tmp_path / "temp.csv").write_text(serialize_ensemble_csv(data))
    (tmp_path / "oni.csv").write_text(serialize_series_csv(oni))
    cfg = tmp_path / "run.toml"
    cfg.write_text(f"""
[data]
temperature = "temp.csv"
oni = "oni.csv"
kind = "hadcrut-ensemble"

[baseline]
end = "1900-12"

[scenario]
enso_paths_per_realization = {paths_per}
horizon_end = "2060-12"
master_seed = 11
regime_candidates = [3]

[output]
directory = "{(tmp_path / 'out').as_posix()}"
paths_sample = 4
{extra}
""")
    return cfg
