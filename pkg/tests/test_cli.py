import json
import os

import numpy as np
import pandas as pd
import pytest

import orbitzeta
from Scripts.errors import FormatError
from Scripts.schottky import load_spectrum

from conftest import REFERENCE_JSON


@pytest.fixture(autouse=True)
def _isolated(monkeypatch, tmp_path):
    monkeypatch.setenv("ORBITZETA_CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setenv("ORBITZETA_CONFIG", str(tmp_path / "no-config.txt"))


@pytest.fixture
def spectrum_file(tmp_path):
    path = str(tmp_path / "ref.csv")
    assert orbitzeta.main(["spectrum", "--group", REFERENCE_JSON, "--cutoff", "12", "--out", path]) == 0
    return path


def test_validate_prints_certificate(capsys):
    assert orbitzeta.main(["--json", "validate", "--group", REFERENCE_JSON]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["rank"] == 2
    assert 0.0 < summary["kappa"] < 0.1


def test_spectrum_command_writes_certified_file(spectrum_file):
    spec = load_spectrum(spectrum_file)
    assert spec.certified
    assert spec.cutoff == 12.0
    assert len(spec.entries) >= 8


def test_uncertified_spectrum_exit_code(tmp_path, capsys):
    out = str(tmp_path / "short.csv")
    argv = ["spectrum", "--group", REFERENCE_JSON, "--cutoff", "24", "--max-word-length", "3", "--out", out]
    assert orbitzeta.main(argv) == orbitzeta.EXIT_UNCERTIFIED
    assert "T_certified" in capsys.readouterr().err
    assert os.path.isfile(out)
    assert orbitzeta.main(argv + ["--force"]) == orbitzeta.EXIT_OK


def test_zeta_grid_to_csv(spectrum_file, tmp_path):
    out = str(tmp_path / "z.csv")
    argv = ["zeta", "--spectrum", spectrum_file, "--abscissa", "0.33",
            "--s-re", "1:2:0.5", "--s-im=-1:1:1", "--out", out]
    assert orbitzeta.main(argv) == 0
    df = pd.read_csv(out)
    assert list(df.columns) == ["s_re", "s_im", "Z_re", "Z_im", "tail_bound"]
    assert len(df) == 9
    assert np.all(np.isfinite(df["Z_re"]))


def test_zeta_near_abscissa_exit_code(spectrum_file, capsys):
    argv = ["zeta", "--spectrum", spectrum_file, "--abscissa", "0.33", "--s-re", "0.35"]
    assert orbitzeta.main(argv) == orbitzeta.EXIT_ABSCISSA
    assert "safe region" in capsys.readouterr().err


def test_parameter_only_tasks(capsys):
    assert orbitzeta.main(["--json", "analyze", "--task", "bounds", "--h", "0.8"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["branch"] == "supercritical"
    assert summary["lower"] == pytest.approx(0.16)
    assert orbitzeta.main(["analyze", "--task", "strip", "--family", "gn", "--rate", "0.8",
                           "--a", "1", "--b", "2"]) == 0


def test_counting_task_uses_the_cache(tmp_path):
    out = str(tmp_path / "count.csv")
    argv = ["analyze", "--task", "counting", "--group", REFERENCE_JSON, "--cutoff", "12",
            "--grid", "0:12:3", "--out", out]
    assert orbitzeta.main(argv) == 0
    assert len(os.listdir(tmp_path / "cache")) == 1
    df = pd.read_csv(out)
    assert list(df.columns) == ["T", "N", "N_p", "N_unoriented"]
    assert df["N"].tolist()[:3] == [0, 0, 4]
    assert orbitzeta.main(argv) == 0


def test_errors_map_to_exit_one(tmp_path):
    assert orbitzeta.main(["validate", "--group", str(tmp_path / "missing.json")]) == orbitzeta.EXIT_ERROR
    assert orbitzeta.main(["analyze", "--task", "entropy"]) == orbitzeta.EXIT_ERROR
    with pytest.raises(SystemExit) as exc:
        orbitzeta.main(["analyze"])
    assert exc.value.code == orbitzeta.EXIT_ERROR


def test_config_file(tmp_path):
    path = tmp_path / "config.txt"
    path.write_text("# defaults\nMAX_WORD_LENGTH = 9\nZeta Margin: 0.2\nbogus: 1\nWorkers: many\n",
                    encoding="utf-8")
    defaults = orbitzeta.load_config_txt(str(path))
    assert defaults.max_word_length == 9
    assert defaults.zeta_margin == 0.2
    assert defaults.workers == 1
    assert defaults.cache_dir == str(tmp_path / "cache")


def test_grids():
    assert np.allclose(orbitzeta.parse_grid("0:1:0.25"), [0.0, 0.25, 0.5, 0.75, 1.0])
    assert orbitzeta.parse_grid("2").tolist() == [2.0]
    with pytest.raises(ValueError):
        orbitzeta.parse_grid("1:0:0.1")
    assert orbitzeta.parse_interval("0:2") == (0.0, 2.0)
    assert orbitzeta.parse_list("0.1, 0.2") == [0.1, 0.2]


def test_output_columns_are_checked(tmp_path):
    assert {"schottky", "thermo", "zeta", "spectral"} <= set(orbitzeta.discover_sidecars())
    with pytest.raises(FormatError):
        orbitzeta.write_table(pd.DataFrame({"x": [1]}), str(tmp_path / "x.csv"), "zeta")


def test_validate_can_save_the_group(tmp_path, capsys):
    out = str(tmp_path / "copy.json")
    assert orbitzeta.main(["--json", "validate", "--group", REFERENCE_JSON, "--save", out]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert orbitzeta.main(["--json", "validate", "--group", out]) == 0
    assert json.loads(capsys.readouterr().out)["digest"] == summary["digest"]


def test_spectrum_file_does_not_depend_on_workers(tmp_path):
    one = tmp_path / "one.csv"
    two = tmp_path / "two.csv"
    base = ["spectrum", "--group", REFERENCE_JSON, "--cutoff", "14"]
    assert orbitzeta.main(base + ["--workers", "1", "--out", str(one)]) == 0
    assert orbitzeta.main(base + ["--workers", "2", "--out", str(two)]) == 0
    assert one.read_bytes() == two.read_bytes()


@pytest.fixture
def longer_spectrum_file(tmp_path):
    path = str(tmp_path / "ref24.csv")
    assert orbitzeta.main(["spectrum", "--group", REFERENCE_JSON, "--cutoff", "24", "--out", path]) == 0
    return path


def test_entropy_task(longer_spectrum_file, capsys):
    assert orbitzeta.main(["--json", "analyze", "--task", "entropy", "--spectrum", longer_spectrum_file]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["task"] == "entropy"
    assert 0.2 < summary["h"] < 0.4
    assert summary["uncertainty"] < 0.1
    assert summary["window"][1] == 24.0


def test_prime_orbit_check_task(longer_spectrum_file, tmp_path, capsys):
    out = str(tmp_path / "pot.csv")
    argv = ["--json", "analyze", "--task", "pot-check", "--spectrum", longer_spectrum_file, "--out", out]
    assert orbitzeta.main(argv) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["variant"] == "plain"
    assert summary["band"] == [0.7, 1.3]
    assert summary["verdict"] in ("trend toward 1", "no clear trend")
    assert len(pd.read_csv(out)) > 0


def test_sweep_command(tmp_path, capsys):
    family = os.path.join(os.path.dirname(REFERENCE_JSON), "sweep_metric_scale.json")
    out = str(tmp_path / "sweep.csv")
    argv = ["--json", "sweep", "--family-file", family, "--cutoff", "24", "--grid", "0:0.3:0.05", "--out", out]
    assert orbitzeta.main(argv) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["family"] == "metric-scale"
    assert summary["points"] == 7
    assert summary["failures"] == []
    df = pd.read_csv(out)
    assert list(df.columns) == ["alpha", "h", "uncertainty", "dd1", "dd2"]
    # lengths scale by 1+alpha, so h scales by its inverse
    assert np.allclose(df["h"] * (1.0 + df["alpha"]), df["h"].iloc[0], rtol=1e-6)
