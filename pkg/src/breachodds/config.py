"""TOML run configuration for the command-line pipeline.

Example::

    [data]
    temperature = "HadCRUT.5.0.2.0.analysis.ensemble_series.global.monthly.csv"
    kind = "hadcrut-ensemble"
    oni = "oni.ascii.txt"
    ipcc_overlay = "ar5_ranges.csv"     # optional

    [baseline]
    end = "1900-12"                      # start defaults to the first month

    [scenario]
    enso_paths_per_realization = 5
    horizon_end = "2100-12"
    master_seed = 20161104

    [backtest]
    cutoff = "2016-11"
    levels = [0.95, 0.99]

    [output]
    directory = "out"
    paths_sample = 100
    svg = true

Relative input paths resolve against ``$BREACHODDS_DATA_DIR`` when it is
set, otherwise against the directory holding the config file.
"""
from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .backtest import DEFAULT_LEVELS
from .engine import MIN_HORIZON, ScenarioConfig
from .errors import BreachOddsError, DomainError
from .ingest import DATASET_KINDS
from .series import MonthDate

DATA_DIR_ENV = "BREACHODDS_DATA_DIR"

_SECTIONS = {
    "data": {"temperature", "kind", "oni", "ipcc_overlay"},
    "baseline": {"start", "end"},
    "scenario": {
        "enso_paths_per_realization", "horizon_end", "master_seed", "trend_candidates",
        "regime_candidates", "bandwidth_exponent", "thresholds", "beta_sharing", "oni_policy",
        "break_trim", "ar_truncation",
    },
    "backtest": {"cutoff", "levels"},
    "output": {"directory", "paths_sample", "svg"},
}
_MONTH_KEYS = {"horizon_end"}


class ConfigError(BreachOddsError, ValueError):
    """Invalid or inconsistent run configuration."""


def file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class RunConfig:
    temperature: Path
    oni: Path
    kind: str = "hadcrut-ensemble"
    ipcc_overlay: Path | None = None
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    cutoff: MonthDate | None = None
    levels: tuple = DEFAULT_LEVELS
    output: Path = Path("out")
    paths_sample: int = 100
    svg: bool = False

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ConfigError(f"data.kind must be one of {DATASET_KINDS}, got {self.kind!r}")
        if self.paths_sample < 0:
            raise ConfigError("output.paths_sample must be >= 0")

    def check_inputs(self):
        for label, p in (("temperature", self.temperature), ("oni", self.oni), ("ipcc_overlay", self.ipcc_overlay)):
            if p is not None and not p.is_file():
                raise FileNotFoundError(f"{label} file not found: {p}")

    def fingerprint(self) -> dict:
        """Everything that determines artifact contents. Paths enter by content
        hash so moving inputs or outputs does not change it."""
        def digest(p):
            return file_sha256(p) if p is not None and p.is_file() else None

        return {
            "data": {"kind": self.kind, "temperature_sha256": digest(self.temperature),
                     "oni_sha256": digest(self.oni), "ipcc_overlay_sha256": digest(self.ipcc_overlay)},
            "scenario": self.scenario.to_dict(),
            "backtest": {"cutoff": str(self.cutoff) if self.cutoff else None, "levels": list(self.levels)},
            "output": {"paths_sample": self.paths_sample, "svg": self.svg},
        }

    def sha256(self) -> str:
        text = json.dumps(self.fingerprint(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def manifest_line(self) -> str:
        return f"config_sha256={self.sha256()} master_seed={self.scenario.master_seed}"

    def override(self, seed=None, cutoff=None, output=None, svg=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, scenario=replace(cfg.scenario, master_seed=int(seed)))
        if cutoff is not None:
            cfg = replace(cfg, cutoff=_month(cutoff, "--cutoff"))
        if output is not None:
            cfg = replace(cfg, output=Path(output))
        if svg:
            cfg = replace(cfg, svg=True)
        return cfg


def _month(value, key) -> MonthDate:
    if isinstance(value, MonthDate):
        return value
    try:
        return MonthDate.parse(str(value))
    except DomainError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _resolve(raw, base: Path) -> Path:
    p = Path(os.path.expanduser(str(raw)))
    return p if p.is_absolute() else base / p


def load_config(path, data_dir=None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        doc = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    base = Path(data_dir or os.environ.get(DATA_DIR_ENV) or path.parent)
    return config_from_dict(doc, base)


def config_from_dict(doc: dict, base: Path = Path(".")) -> RunConfig:
    for section, body in doc.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        unknown = set(body) - _SECTIONS[section]
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    data = doc.get("data", {})
    for key in ("temperature", "oni"):
        if key not in data:
            raise ConfigError(f"[data] {key} is required")

    sc = {}
    for key, value in doc.get("scenario", {}).items():
        sc[key] = _month(value, f"scenario.{key}") if key in _MONTH_KEYS else value
    bl = doc.get("baseline", {})
    if "start" in bl:
        sc["baseline_start"] = _month(bl["start"], "baseline.start")
    if "end" in bl:
        sc["baseline_end"] = _month(bl["end"], "baseline.end")
    try:
        scenario = ScenarioConfig(**sc)
    except (TypeError, DomainError) as exc:
        raise ConfigError(f"[scenario]: {exc}") from None

    bt = doc.get("backtest", {})
    out = doc.get("output", {})
    overlay = data.get("ipcc_overlay")
    return RunConfig(
        temperature=_resolve(data["temperature"], base),
        oni=_resolve(data["oni"], base),
        kind=data.get("kind", "hadcrut-ensemble"),
        ipcc_overlay=_resolve(overlay, base) if overlay else None,
        scenario=scenario,
        cutoff=_month(bt["cutoff"], "backtest.cutoff") if "cutoff" in bt else None,
        levels=tuple(float(v) for v in bt.get("levels", DEFAULT_LEVELS)),
        output=Path(out.get("directory", "out")),
        paths_sample=int(out.get("paths_sample", 100)),
        svg=bool(out.get("svg", False)),
    )


def check_horizon(cfg: RunConfig, history_end: MonthDate):
    h = cfg.scenario.horizon_end - history_end
    if h < MIN_HORIZON:
        raise ConfigError(f"horizon_end {cfg.scenario.horizon_end} leaves {h} months after {history_end}; "
                          f"need >= {MIN_HORIZON}")
