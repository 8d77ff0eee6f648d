import json

import numpy as np
import pytest
from click.testing import CliRunner

from breachodds.cli import cli
from breachodds.config import load_config
from breachodds.series import MonthDate

from synth import ensemble, write_inputs


def invoke(*args):
    return CliRunner().invoke(cli, [str(a) for a in args], catch_exceptions=False)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("run")
    cfg = write_inputs(tmp, n_real=2, paths_per=3)
    res = invoke("run", "--config", cfg, "--svg")
    assert res.exit_code == 0, res.output
    return cfg, tmp / "out"


def test_run_writes_every_artifact(pipeline):
    _, out = pipeline
    for rel in ("ingest/dataset.csv", "ingest/oni.csv", "ingest/manifest.json",
                "fits/realization_000.json", "fits/realization_001.json", "fits/ms_model.json",
                "fits/summary.json", "simulate/breach.csv", "simulate/paths_sample.csv",
                "simulate/headline.txt", "simulate/paths.svg", "simulate/breach.svg"):
        assert (out / rel).is_file(), rel
    assert not (out / "fits/realization_002.json").exists()
    manifest = json.loads((out / "ingest/manifest.json").read_text())
    assert manifest["n_realizations"] == 2
    assert manifest["baseline"]["start"] == "1850-01" and manifest["baseline"]["end"] == "1900-12"


def test_artifact_headers_and_schema(pipeline):
    cfg, out = pipeline
    sha = load_config(cfg).override(svg=True).sha256()
    lines = (out / "simulate/breach.csv").read_text().splitlines()
    assert lines[0] == f"# config_sha256={sha} master_seed=11"
    assert lines[1] == "year,month,prob_1p5,prob_2p0,n_paths"
    assert lines[2].endswith(",6")
    paths = (out / "simulate/paths_sample.csv").read_text().splitlines()
    assert paths[0].startswith("# config_sha256=")
    headline = (out / "simulate/headline.txt").read_text()
    assert "P(1.5°C)>=0.5" in headline


def test_fit_documents_are_complete(pipeline):
    _, out = pipeline
    doc = json.loads((out / "fits/realization_000.json").read_text())
    assert {"trend", "memory"} <= set(doc)
    ms = json.loads((out / "fits/ms_model.json").read_text())
    assert ms["k"] == 3
    summary = json.loads((out / "fits/summary.json").read_text())
    assert summary["failed"] == [] and summary["n_realizations"] == 2


def test_rerun_is_byte_identical(pipeline, tmp_path):
    cfg, out = pipeline
    res = invoke("run", "--config", cfg, "--svg", "--output", tmp_path / "again", "--workers", 2)
    assert res.exit_code == 0, res.output
    for rel in ("fits/realization_000.json", "fits/realization_001.json", "fits/ms_model.json",
                "simulate/breach.csv", "simulate/paths_sample.csv", "simulate/paths.svg",
                "simulate/breach.svg"):
        assert (out / rel).read_bytes() == (tmp_path / "again" / rel).read_bytes(), rel


def test_seed_override_changes_paths_not_schema(pipeline, tmp_path):
    cfg, out = pipeline
    res = invoke("run", "--config", cfg, "--seed", 12, "--output", tmp_path)
    assert res.exit_code == 0, res.output
    a = (out / "simulate/paths_sample.csv").read_text().splitlines()
    b = (tmp_path / "simulate/paths_sample.csv").read_text().splitlines()
    assert a[1] == b[1]
    assert b[0].endswith("master_seed=12")
    assert a[2:] != b[2:]
    # fits do not depend on the simulation seed
    assert (out / "fits/ms_model.json").read_bytes() == (tmp_path / "fits/ms_model.json").read_bytes()


def test_simulate_reuses_fits_after_seed_change(pipeline, tmp_path):
    cfg, out = pipeline
    assert invoke("ingest", "--config", cfg, "--output", tmp_path).exit_code == 0
    assert invoke("fit", "--config", cfg, "--output", tmp_path).exit_code == 0
    res = invoke("simulate", "--config", cfg, "--output", tmp_path, "--seed", 99)
    assert res.exit_code == 0, res.output


def test_single_threshold(tmp_path):
    cfg = write_inputs(tmp_path, n_real=1, paths_per=2, extra="")
    text = cfg.read_text().replace("regime_candidates = [3]", "regime_candidates = [3]\nthresholds = [1.5]")
    cfg.write_text(text)
    assert invoke("run", "--config", cfg).exit_code == 0
    lines = (tmp_path / "out/simulate/breach.csv").read_text().splitlines()
    assert lines[1] == "year,month,prob_1p5,n_paths"
    assert "2.0" not in (tmp_path / "out/simulate/headline.txt").read_text()


def test_missing_input_exits_2_naming_path(tmp_path):
    cfg = write_inputs(tmp_path, n_real=1)
    (tmp_path / "oni.csv").unlink()
    res = invoke("ingest", "--config", cfg)
    assert res.exit_code == 2
    assert str(tmp_path / "oni.csv") in res.output


def test_unknown_config_key_exits_2(tmp_path):
    cfg = write_inputs(tmp_path, n_real=1, extra="\n[scenario2]\nx = 1\n")
    res = invoke("ingest", "--config", cfg)
    assert res.exit_code == 2 and "scenario2" in res.output


def test_parse_error_names_file_and_line(tmp_path):
    cfg = write_inputs(tmp_path, n_real=1)
    temp = tmp_path / "temp.csv"
    lines = temp.read_text().splitlines()
    idx = next(i for i, line in enumerate(lines) if line[:1].isdigit()) + 3
    lines[idx] = lines[idx].split(",")[0] + ",abc"
    temp.write_text("\n".join(lines) + "\n")
    res = invoke("ingest", "--config", cfg)
    assert res.exit_code == 2
    assert f"temp.csv:{idx + 1}" in res.output


def test_stale_ingest_and_fit_detected(tmp_path):
    cfg = write_inputs(tmp_path, n_real=1, paths_per=2)
    assert invoke("ingest", "--config", cfg).exit_code == 0
    assert invoke("fit", "--config", cfg).exit_code == 0
    text = cfg.read_text()
    cfg.write_text(text.replace("regime_candidates = [3]", "regime_candidates = [1]"))
    res = invoke("simulate", "--config", cfg)
    assert res.exit_code == 2 and "stale" in res.output
    cfg.write_text(text.replace('end = "1900-12"', 'end = "1910-12"'))
    res = invoke("fit", "--config", cfg)
    assert res.exit_code == 2 and "ingest" in res.output


def test_simulate_before_fit(tmp_path):
    cfg = write_inputs(tmp_path, n_real=1)
    assert invoke("ingest", "--config", cfg).exit_code == 0
    res = invoke("simulate", "--config", cfg)
    assert res.exit_code == 2 and "breachodds fit" in res.output


def test_short_history_exits_1(tmp_path):
    cfg = write_inputs(tmp_path, n_real=2)
    temp = tmp_path / "temp.csv"
    kept = [line for line in temp.read_text().splitlines() if not line[:1].isdigit() or line < "1885"]
    temp.write_text("\n".join(kept) + "\n")
    cfg.write_text(cfg.read_text().replace('horizon_end = "2060-12"', 'horizon_end = "1920-12"'))
    assert invoke("ingest", "--config", cfg).exit_code == 0
    res = invoke("fit", "--config", cfg)
    assert res.exit_code == 1
    assert "realization 0" in res.output and "realization 1" in res.output


def test_horizon_too_short_exits_2(tmp_path):
    cfg = write_inputs(tmp_path, n_real=1)
    cfg.write_text(cfg.read_text().replace('horizon_end = "2060-12"', 'horizon_end = "2030-12"'))
    res = invoke("ingest", "--config", cfg)
    assert res.exit_code == 2 and "240" in res.output


def test_backtest_cutoff_checks(pipeline, tmp_path):
    cfg, _ = pipeline
    out = tmp_path / "bt"
    assert invoke("ingest", "--config", cfg, "--output", out).exit_code == 0
    res = invoke("backtest", "--config", cfg, "--output", out, "--cutoff", "2030-01")
    assert res.exit_code == 2 and "2030-01" in res.output
    res = invoke("backtest", "--config", cfg, "--output", out, "--cutoff", "1880-01")
    assert res.exit_code == 2 and "480" in res.output
    res = invoke("backtest", "--config", cfg, "--output", out)
    assert res.exit_code == 2 and "cutoff" in res.output
    res = invoke("backtest", "--config", cfg, "--output", out, "--cutoff", "2016-13")
    assert res.exit_code == 2


def test_backtest_artifacts(tmp_path):
    cfg = write_inputs(tmp_path, n_real=20, paths_per=5)
    overlay = tmp_path / "ranges.csv"
    overlay.write_text("date,low,high\n2017-01,0.6,1.2\n2017-02,0.6,1.2\n")
    text = cfg.read_text().replace('kind = "hadcrut-ensemble"', 'kind = "hadcrut-ensemble"\nipcc_overlay = "ranges.csv"')
    cfg.write_text(text + '\n[backtest]\ncutoff = "2016-11"\n')
    res = invoke("run", "--config", cfg, "--svg")
    assert res.exit_code == 0, res.output
    out = tmp_path / "out/backtest-2016-11"
    for name in ("bands.csv", "breach.csv", "coverage.csv", "coverage.json", "bands.svg", "breach.svg"):
        assert (out / name).is_file(), name
    doc = json.loads((out / "coverage.json").read_text())
    assert set(doc["overlay_gaps"]) == {"low", "high"}
    bands = (out / "bands.csv").read_text().splitlines()
    assert bands[1] == "year,month,median,lower_0p95,upper_0p95,lower_0p99,upper_0p99"
    assert bands[2].startswith("2016,12,")
    cov = (out / "coverage.csv").read_text().splitlines()
    assert len(cov) == 2 + 49   # 2016-12 .. 2020-12


def _gistemp_wide(series):
    names = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]
    rows = ["GLOBAL Land-Ocean Temperature Index in degrees Celsius", "Year," + ",".join(names) + ",J-D"]
    v = series.values
    year0 = series.start.year
    for i in range(0, len(v), 12):
        cells = [f"{x:.2f}" for x in v[i:i + 12]]
        cells += ["***"] * (12 - len(cells))
        rows.append(f"{year0 + i // 12}," + ",".join(cells) + ",***")
    return "\n".join(rows) + "\n"


def test_gistemp_kind(tmp_path):
    cfg = write_inputs(tmp_path, n_real=1, paths_per=3)
    series = ensemble(1, start=MonthDate(1880, 1), end=MonthDate(2020, 9))[0]
    (tmp_path / "gistemp.csv").write_text(_gistemp_wide(series))
    text = cfg.read_text().replace('temperature = "temp.csv"', 'temperature = "gistemp.csv"')
    cfg.write_text(text.replace('kind = "hadcrut-ensemble"', 'kind = "gistemp"'))
    res = invoke("run", "--config", cfg)
    assert res.exit_code == 0, res.output
    manifest = json.loads((tmp_path / "out/ingest/manifest.json").read_text())
    assert manifest["n_realizations"] == 1
    assert manifest["span"]["end"] == "2020-09"
    assert manifest["native_baseline"]["start"] == "1951-01"
    breach = (tmp_path / "out/simulate/breach.csv").read_text().splitlines()
    assert breach[2].endswith(",3")


def test_data_dir_env(tmp_path, monkeypatch):
    data = tmp_path / "data"
    data.mkdir()
    cfg = write_inputs(data, n_real=1)
    moved = tmp_path / "run.toml"
    moved.write_text(cfg.read_text())
    monkeypatch.setenv("BREACHODDS_DATA_DIR", str(data))
    assert invoke("ingest", "--config", moved).exit_code == 0
    monkeypatch.delenv("BREACHODDS_DATA_DIR")
    assert invoke("ingest", "--config", moved).exit_code == 2


def test_version():
    res = invoke("--version")
    assert res.exit_code == 0 and "kernels" in res.output


def test_config_hash_ignores_output_and_workers(tmp_path):
    cfg = write_inputs(tmp_path, n_real=1)
    a = load_config(cfg)
    assert a.sha256() == a.override(output=tmp_path / "elsewhere").sha256()
    assert a.sha256() != a.override(seed=3).sha256()
    assert np.isclose(a.scenario.master_seed, 11)
