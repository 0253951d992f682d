import json
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from bandsup import __version__, validation
from bandsup.cli import ENV_OUTPUT_DIR, SUBCOMMANDS, main
from bandsup.config import ExperimentConfig
from bandsup.reports import PLOT_COLUMNS, csv_text, json_text, jsonable, read_csv
from bandsup.validation import CriterionResult

GOLDEN = Path(__file__).parent / "golden"

# small settings so each subcommand runs in about a second
FAST = ["scales.j=[4]", "monte_carlo.replicates=50", "thresholds.excursion_replicates=300",
        "thresholds.u=[3.5]", "nets.j=4", "nets.decay_j=[4,5]", "nets.whitening_replicates=50",
        "berman.n=1000", "berman.replicates=20", "synth.n_points=200"]


def run(argv, tmp_path, fast=True):
    # the fast defaults come first so a test's own --set wins
    sets = [a for kv in FAST for a in ("--set", kv)] if fast else []
    return main([argv[0], *sets, *argv[1:], "--output-dir", str(tmp_path)])


def payload_files(directory):
    return sorted(p for p in Path(directory).iterdir() if p.name != "manifest.json" and p.is_file())


# -- help and version -------------------------------------------------------

@pytest.mark.parametrize("name", ["main", *SUBCOMMANDS])
def test_help_matches_golden(name, capsys):
    argv = [] if name == "main" else [name]
    with pytest.raises(SystemExit) as exc:
        main(argv + ["--help"])
    assert exc.value.code == 0
    assert capsys.readouterr().out == (GOLDEN / f"help_{name}.txt").read_text()


def test_help_lines_fit_width():
    for f in GOLDEN.glob("help_*.txt"):
        assert max(len(line) for line in f.read_text().splitlines()) <= 100


def test_version(capsys):
    with pytest.raises(SystemExit):
        main(["--version"])
    assert capsys.readouterr().out.strip() == f"bandsup {__version__}"


def test_console_entry_point(tmp_path):
    env = {**os.environ, ENV_OUTPUT_DIR: str(tmp_path)}
    proc = subprocess.run([sys.executable, "-m", "bandsup.cli", "entropy", "--set", "scales.j=[4]"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    assert "entropy: j=4" in proc.stdout
    assert (tmp_path / "entropy" / "manifest.json").exists()


# -- exit codes -------------------------------------------------------------

@pytest.mark.parametrize("name", ["synth", "covariance", "sup-scaling", "excursion", "entropy",
                                  "net-whiten", "berman"])
def test_subcommands_succeed(name, tmp_path, capsys):
    assert run([name], tmp_path) == 0
    out = capsys.readouterr().out
    assert f"to {tmp_path / name}" in out
    manifest = json.loads((tmp_path / name / "manifest.json").read_text())
    assert manifest["exit_status"] == 0 and manifest["command"] == name
    assert set(manifest["files"]) == {p.name for p in payload_files(tmp_path / name)}


def test_validation_failure_exits_one(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(validation, "run_criterion",
                        lambda n, cfg=None, **kw: CriterionResult(n, "forced", False, "forced failure"))
    assert main(["validate-all", "--criteria", "3", "--output-dir", str(tmp_path)]) == 1
    assert "0/1 criteria passed" in capsys.readouterr().out


def test_validate_all_subset_passes(tmp_path, capsys):
    assert main(["validate-all", "--criteria", "3,4", "--output-dir", str(tmp_path)]) == 0
    _, header, rows = read_csv(tmp_path / "validate-all" / "acceptance.csv")
    assert header == ["criterion", "name", "passed", "summary"]
    assert [r[0] for r in rows] == ["3", "4"] and all(r[2] == "true" for r in rows)


@pytest.mark.parametrize("argv,message", [
    (["synth", "--set", "window.kind=gaussian"], "window.kind"),
    (["synth", "--set", "nope.key=1"], "unknown key"),
    (["sup-scaling", "--set", "monte_carlo.replicates=10"], "50"),
    (["excursion", "--set", "thresholds.u=[4.5]"], "exceedances"),
    (["validate-all", "--criteria", "12"], "valid numbers are 1-9"),
    (["synth", "--config", "/nonexistent.json"], "cannot read config"),
])
def test_configuration_errors_exit_two(argv, message, tmp_path, capsys):
    assert run(argv, tmp_path) == 2
    err = capsys.readouterr().err
    assert err.startswith("configuration error:") and message in err


def test_power_guard_can_be_disabled(tmp_path):
    assert run(["excursion", "--no-power-guard", "--set", "thresholds.u=[4.5]"], tmp_path) == 0


def test_capacity_error_exits_three(tmp_path, capsys):
    assert run(["sup-scaling", "--set", "scales.j=[12]"], tmp_path) == 3
    err = capsys.readouterr().err
    assert "capacity error" in err and "hint:" in err
    assert run(["net-whiten", "--set", "nets.eigen_capacity=10"], tmp_path) == 3


def test_usage_error_is_argparse():
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2


# -- output directory precedence --------------------------------------------

def test_output_dir_precedence(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(ENV_OUTPUT_DIR, raising=False)
    assert main(["entropy", "--set", "output.directory=from_config"]) == 0
    assert (tmp_path / "from_config" / "entropy" / "entropy.csv").exists()
    monkeypatch.setenv(ENV_OUTPUT_DIR, str(tmp_path / "from_env"))
    assert main(["entropy", "--set", "output.directory=from_config"]) == 0
    assert (tmp_path / "from_env" / "entropy" / "entropy.csv").exists()
    assert main(["entropy", "--output-dir", str(tmp_path / "from_flag")]) == 0
    assert (tmp_path / "from_flag" / "entropy" / "entropy.csv").exists()


# -- payload content ----------------------------------------------------------

def test_null_spectrum_synth_writes_zeros(tmp_path):
    assert run(["synth", "--set", "spectrum.g_num=[0]"], tmp_path) == 0
    pre, header, rows = read_csv(tmp_path / "synth" / "field.csv")
    assert header == ["theta", "phi", "value"] and len(rows) == 200
    assert all(float(r[2]) == 0.0 for r in rows)
    doc = json.loads((tmp_path / "synth" / "field.json").read_text())
    assert doc["report"]["max"] == 0.0 and doc["report"]["normalization"] is None
    assert (tmp_path / "synth" / "manifest.json").exists()


def test_synth_normalized_field_has_unit_variance(tmp_path):
    assert run(["synth", "--set", "synth.n_points=3000"], tmp_path, fast=False) == 0
    doc = json.loads((tmp_path / "synth" / "field.json").read_text())["report"]
    assert doc["kind"] == "beta_tilde"
    # one realization: the spatial variance is near 1 but not exactly
    assert 0.5 < doc["variance"] < 1.5


def test_every_payload_embeds_config_and_seed(tmp_path):
    for name in ("covariance", "excursion", "berman"):
        assert run([name, "--plot-data"], tmp_path) == 0
        cfg = ExperimentConfig.default().with_overrides(FAST)
        for p in payload_files(tmp_path / name):
            if p.suffix == ".csv":
                pre, _, _ = read_csv(p)
                assert pre["command"] == name
                assert pre["config_sha256"] == cfg.digest()
                assert int(pre["master_seed"]) == 20240601
                assert ExperimentConfig.from_json(pre["config"]) == cfg
            elif p.suffix == ".json":
                doc = json.loads(p.read_text())
                assert doc["config_sha256"] == cfg.digest() and doc["master_seed"] == 20240601
                assert ExperimentConfig.from_dict(doc["config"]) == cfg


def test_reruns_are_byte_identical(tmp_path):
    for k in (1, 2):
        assert run(["sup-scaling", "--plot-data"], tmp_path / f"run{k}") == 0
    a, b = payload_files(tmp_path / "run1" / "sup-scaling"), payload_files(tmp_path / "run2" / "sup-scaling")
    assert [p.name for p in a] == [p.name for p in b] and a
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()


def test_plot_data_and_figures(tmp_path):
    assert run(["berman", "--plot-data", "--figures"], tmp_path) == 0
    _, header, rows = read_csv(tmp_path / "berman" / "berman.plot.csv")
    assert tuple(header) == PLOT_COLUMNS
    assert {r[1] for r in rows} == {"monte carlo", "second-order expansion"}
    png = (tmp_path / "berman" / "berman.png").read_bytes()
    assert png[:8] == b"\x89PNG\r\n\x1a\n"
    manifest = json.loads((tmp_path / "berman" / "manifest.json").read_text())
    assert "berman.png" in manifest["files"] and "versions" in manifest


def test_formats_restrict_output(tmp_path):
    assert run(["entropy", "--set", 'output.formats=["json"]'], tmp_path) == 0
    assert {p.suffix for p in payload_files(tmp_path / "entropy")} == {".json"}


def test_excursion_report_columns(tmp_path):
    assert run(["excursion"], tmp_path) == 0
    _, header, rows = read_csv(tmp_path / "excursion" / "excursion.csv")
    for col in ("u", "mc_prob", "ec_value", "ec_l0_value", "borell_bound"):
        assert col in header
    r = dict(zip(header, rows[0]))
    assert float(r["u"]) == 3.5 and 0 <= float(r["mc_prob"]) <= 1


# -- report helpers ---------------------------------------------------------

def test_csv_roundtrip(tmp_path):
    text = csv_text(["a", "b", "c"], [[1, 0.1, "x,y"], [True, float("nan"), None]],
                    {"note": "hello", "cfg": {"k": [1, 2]}})
    p = tmp_path / "t.csv"
    p.write_text(text)
    pre, header, rows = read_csv(p)
    assert pre == {"note": "hello", "cfg": '{"k":[1,2]}'}
    assert header == ["a", "b", "c"]
    assert rows == [["1", "0.1", "x,y"], ["true", "nan", ""]]


def test_floats_keep_full_precision(tmp_path):
    x = math.pi / 3
    p = tmp_path / "f.csv"
    p.write_text(csv_text(["x"], [[np.float64(x)]]))
    assert float(read_csv(p)[2][0][0]) == x


def test_jsonable():
    out = jsonable({"a": np.arange(3), "b": np.float32(0.5), "c": float("inf"), "d": (1, None)})
    assert out == {"a": [0, 1, 2], "b": 0.5, "c": "inf", "d": [1, None]}
    assert json_text({"b": 1, "a": 2}).index('"a"') < json_text({"b": 1, "a": 2}).index('"b"')
    with pytest.raises(TypeError):
        jsonable(object())
