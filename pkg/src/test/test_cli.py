import io
import json

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from app.cli import cli
from app.core.config import settings
from app.core.imageio import write_pgm, write_raw
from app.core.ndgrid import from_nested
from app.utils.exceptions import EXIT_DATA, EXIT_USAGE

from .helpers import WORKED_GD

runner = CliRunner()


def data_lines(text):
    return [line for line in text.splitlines() if line and not line.startswith("#")]


@pytest.fixture
def volume_file(tmp_path, worked_volume):
    header = tmp_path / "volume.ndh"
    write_raw(worked_volume, header)
    return header


@pytest.fixture
def synth_root(tmp_path):
    root = tmp_path / "synth"
    result = runner.invoke(cli, [
        "synth", str(root), "--classes", "4", "--per-class", "3", "--size", "16", "--levels", "16"
    ])
    assert result.exit_code == 0, result.output
    return root


@pytest.fixture
def single_class_root(tmp_path, rng):
    root = tmp_path / "single"
    (root / "only").mkdir(parents=True)
    for j in range(9):
        write_pgm(from_nested(rng.integers(0, 8, size=(8, 8)), levels=8), root / "only" / f"img{j:02d}.pgm")
    return root


#=========================================================================================
# glcm
#=========================================================================================

def test_glcm_golden_volume(volume_file):
    result = runner.invoke(cli, ["glcm", str(volume_file), "--direction", "1,0,0"])
    assert result.exit_code == 0, result.output
    rows = [[int(v) for v in line.split(",")] for line in data_lines(result.stdout)]
    assert rows == WORKED_GD
    assert "pair_total=18" in result.stdout


def test_glcm_json_normalized(volume_file):
    result = runner.invoke(cli, ["glcm", str(volume_file), "--direction", "1,0,0", "--normalize", "--format", "json"])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.stdout)
    assert payload["probs"][0][1] == pytest.approx(3 / 18)


def test_glcm_arity_mismatch(volume_file):
    result = runner.invoke(cli, ["glcm", str(volume_file), "--direction", "1,0"])
    assert result.exit_code == EXIT_DATA


def test_glcm_normalize_without_pairs(tmp_path):
    path = tmp_path / "dot.pgm"
    write_pgm(from_nested([[1]], levels=2), path)
    result = runner.invoke(cli, ["glcm", str(path), "--direction", "1,0", "--normalize"])
    assert result.exit_code == EXIT_DATA


def test_invalid_option_is_usage_error(volume_file):
    result = runner.invoke(cli, ["glcm", str(volume_file), "--direction", "1,0,0", "--k", "0"])
    assert result.exit_code == EXIT_USAGE


#=========================================================================================
# features
#=========================================================================================

def test_features_constant_image(tmp_path):
    (tmp_path / "flat").mkdir()
    path = tmp_path / "flat" / "plain.pgm"
    write_pgm(from_nested(np.full((6, 6), 3), levels=8), path)
    result = runner.invoke(cli, ["features", str(path)])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(io.StringIO(result.stdout))
    assert frame.loc[0, "id"] == "plain"
    assert frame.loc[0, "class"] == "flat"
    assert frame.loc[0, "trace"] == 1.0
    assert frame.loc[0, "contrast"] == 0.0


def test_features_single_direction(tmp_path):
    path = tmp_path / "board.pgm"
    write_pgm(from_nested([[0, 1], [1, 0]], levels=2), path)
    result = runner.invoke(cli, ["features", str(path), "--directions", "1,0"])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(io.StringIO(result.stdout))
    assert frame.loc[0, "contrast"] == 1.0
    assert frame.loc[0, "correlation"] == -1.0


def test_features_dataset(single_class_root):
    result = runner.invoke(cli, ["features", str(single_class_root), "--format", "json"])
    assert result.exit_code == 0, result.output
    rows = json.loads(result.stdout)
    assert len(rows) == 9
    assert rows[0]["id"] == "only/img00"


def test_features_per_direction(single_class_root):
    result = runner.invoke(cli, ["features", str(single_class_root / "only" / "img00.pgm"), "--per-direction"])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(io.StringIO(result.stdout))
    assert frame["direction"].tolist() == ["0,1", "1,-1", "1,0", "1,1"]


#=========================================================================================
# index / query
#=========================================================================================

def test_index_and_query(synth_root, tmp_path):
    index_path = tmp_path / "index.json"
    result = runner.invoke(cli, ["index", str(synth_root), "--feature-set", "haralick4", "--output", str(index_path)])
    assert result.exit_code == 0, result.output
    assert json.loads(index_path.read_text())["schema"] == ["contrast", "correlation", "energy", "homogeneity"]

    result = runner.invoke(cli, ["query", str(index_path), "c00-constant/img00", "--m", "3"])
    assert result.exit_code == 0, result.output
    lines = data_lines(result.stdout)
    assert lines[0] == "id,distance"
    assert len(lines) == 4
    assert lines[1].startswith("c00-constant/img00,0")

    result = runner.invoke(cli, ["query", str(index_path), "c00-constant/img00", "--m", "3", "--exclude-self"])
    assert data_lines(result.stdout)[1].startswith("c00-constant/img01,")

    image = synth_root / "c00-constant" / "img00.pgm"
    result = runner.invoke(cli, ["query", str(index_path), "--image", str(image), "--m", "1", "--format", "json"])
    assert result.exit_code == 0, result.output
    assert json.loads(result.stdout) == [{"id": "c00-constant/img00", "distance": 0.0}]


def test_query_unknown_id(synth_root, tmp_path):
    index_path = tmp_path / "index.json"
    runner.invoke(cli, ["index", str(synth_root), "--output", str(index_path)])
    result = runner.invoke(cli, ["query", str(index_path), "nobody/img00"])
    assert result.exit_code == EXIT_DATA


def test_query_needs_id_or_image(synth_root, tmp_path):
    index_path = tmp_path / "index.json"
    runner.invoke(cli, ["index", str(synth_root), "--output", str(index_path)])
    result = runner.invoke(cli, ["query", str(index_path)])
    assert result.exit_code == EXIT_USAGE


#=========================================================================================
# evaluate / synth
#=========================================================================================

def test_evaluate_single_class(single_class_root):
    result = runner.invoke(cli, ["evaluate", str(single_class_root), "--feature-set", "haralick4"])
    assert result.exit_code == 0, result.output
    lines = data_lines(result.stdout)
    assert lines[0] == "query_id,precision"
    assert lines[1:3] == ["only/img00,1.000000", "only/img03,1.000000"]
    assert lines[-1] == "average_precision,1.000000"


def test_evaluate_index_file(synth_root, tmp_path):
    index_path = tmp_path / "index.json"
    runner.invoke(cli, ["index", str(synth_root), "--output", str(index_path)])
    result = runner.invoke(cli, ["evaluate", str(index_path), "--format", "json"])
    assert result.exit_code == 0, result.output
    report = json.loads(result.stdout)
    assert len(report["per_query"]) == 4
    assert report["feature_set"] == "trace4"


def test_evaluate_compare(synth_root, tmp_path):
    reports = tmp_path / "reports"
    result = runner.invoke(cli, ["evaluate", str(synth_root), "--compare", "--output", str(reports)])
    assert result.exit_code == 0, result.output
    assert sorted(path.name for path in reports.iterdir()) == [
        "report-combined8.csv", "report-haralick4.csv", "report-trace4.csv"
    ]
    assert "haralick4" in result.stdout
    assert "referencia" not in result.stdout


def test_evaluate_reproduction_mode(synth_root, monkeypatch):
    monkeypatch.setattr(settings, "DATASET_ROOT", str(synth_root))
    result = runner.invoke(cli, ["evaluate"])
    assert result.exit_code == 0, result.output
    assert "referencia 0.8194" in result.stdout
    assert "referencia 0.7222" in result.stdout


def test_evaluate_without_source(monkeypatch):
    monkeypatch.setattr(settings, "DATASET_ROOT", None)
    result = runner.invoke(cli, ["evaluate"])
    assert result.exit_code == EXIT_USAGE


def test_evaluate_help_shows_defaults():
    result = runner.invoke(cli, ["evaluate", "--help"])
    assert result.exit_code == 0
    assert "default: 8" in result.output


def test_synth_writes_corpus(synth_root):
    assert (synth_root / "provenance.json").is_file()
    assert len(list(synth_root.glob("*/*.pgm"))) == 12


def test_synth_invalid_spec(tmp_path):
    result = runner.invoke(cli, ["synth", str(tmp_path / "bad"), "--classes", "1"])
    assert result.exit_code == EXIT_USAGE
