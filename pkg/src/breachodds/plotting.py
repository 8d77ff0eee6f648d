"""Static SVG figures: sample paths, breach curves, backtest bands."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp so reruns produce identical files
matplotlib.rcParams["svg.hashsalt"] = "breachodds"
_META = {"Date": None, "Creator": "breachodds"}


def _x(months):
    return np.array([m.year + (m.month - 0.5) / 12 for m in months])


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def plot_paths(paths, path, observed=None, thresholds=(1.5, 2.0)):
    fig, ax = plt.subplots(figsize=(9, 5))
    for p in paths:
        ax.plot(_x(p.future.dates()), p.future.values, lw=0.4, alpha=0.35, color="tab:red")
    if observed is not None:
        ax.plot(_x(observed.dates()), observed.values, lw=1.0, color="black", label="observed (ensemble mean)")
    for t in thresholds:
        ax.axhline(t, ls="--", lw=0.8, color="grey")
    ax.set_xlabel("year")
    ax.set_ylabel("anomaly vs pre-industrial (°C)")
    ax.set_title(f"{len(paths)} simulated paths")
    ax.legend(loc="upper left")
    _save(fig, path)


def plot_breach(dist, path, title="Share of paths whose 20-year mean has breached"):
    fig, ax = plt.subplots(figsize=(9, 5))
    x = _x(dist.months())
    for i, t in enumerate(dist.thresholds):
        ax.plot(x, dist.prob[i], label=f"{t:g}°C")
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("centre month of 20-year window")
    ax.set_ylabel("proportion of paths")
    ax.set_title(f"{title} (n={dist.n_paths})")
    ax.legend(loc="upper left")
    _save(fig, path)


def plot_bands(bands, path, observed=None, overlay=None):
    fig, ax = plt.subplots(figsize=(9, 5))
    x = _x(bands.months())
    for lv, alpha in zip(sorted(bands.levels, reverse=True), (0.2, 0.35, 0.5)):
        lo, hi = bands.band(lv)
        ax.fill_between(x, lo, hi, alpha=alpha, color="tab:blue", lw=0, label=f"{lv:.0%} interval")
    ax.plot(x, bands.median, color="tab:blue", lw=0.8, label="median")
    if observed is not None:
        ax.plot(_x(observed.dates()), observed.values, color="black", lw=0.8, label="observed")
    if overlay is not None:
        for name, curve in overlay.curves.items():
            ax.plot(_x(curve.dates()), curve.values, ls="--", color="tab:green", lw=1.0, label=name)
    ax.set_xlabel("year")
    ax.set_ylabel("anomaly vs pre-industrial (°C)")
    ax.set_title(f"Prediction intervals from {bands.n_paths} paths after {bands.start.shift(-1)}")
    ax.legend(loc="upper left")
    _save(fig, path)
