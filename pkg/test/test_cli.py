"""Tests for the etroll command line."""

import json
import os

import pytest

import cli
from cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from dataset import MANIFEST_NAME, read_features


def test_unknown_command():
    assert main(["teleport"]) == EXIT_USAGE


def test_unknown_object():
    assert main(["simulate", "--objects", "triangle", "--out", "unused"]) == EXIT_USAGE


def test_missing_dataset(tmp_path):
    assert main(["extract", "--dataset", str(tmp_path / "nowhere"), "--out", str(tmp_path / "f.csv")]) == EXIT_USAGE


def test_unknown_config_key(tmp_path):
    path = tmp_path / "etroll.yaml"
    path.write_text("procedure:\n  warp_speed: 9\n", encoding="utf-8")
    assert main(["--config", str(path), "fig2"]) == EXIT_USAGE


def test_value_error_during_a_command_is_a_runtime_failure(monkeypatch):
    def broken(*_args):
        raise ValueError("circumradius must be positive, got 0")

    monkeypatch.setattr(cli, "fig2_experiment", broken)
    assert main(["fig2"]) == EXIT_RUNTIME


def test_channel_outside_the_feature_matrix(tmp_path):
    features = tmp_path / "features.csv"
    header = ",".join(["label"] + [f"f{i}" for i in range(16)])
    features.write_text(header + "\n" + "circle," + ",".join(["1.0"] * 16) + "\n", encoding="utf-8")
    args = ["plot", "--features", str(features), "--channels", "3", "--out", str(tmp_path / "plots")]
    assert main(args) == EXIT_USAGE


def test_fig2_report(tmp_path, capsys):
    out = tmp_path / "fig2.json"
    assert main(["fig2", "--out", str(out)]) == EXIT_OK
    assert "Rotation increase" in capsys.readouterr().out
    data = json.loads(out.read_text(encoding="utf-8"))
    assert data['rotation_dynamic_deg'] > data['rotation_fixed_deg']


def test_simulate_is_reproducible_and_extracts(tmp_path):
    for name in ("a", "b"):
        args = ["simulate", "--objects", "circle", "--runs-per-object", "1", "--seed", "4", "--out", str(tmp_path / name)]
        assert main(args) == EXIT_OK

    files = sorted(os.listdir(tmp_path / "a"))
    assert files == ["circle_001.csv", MANIFEST_NAME]
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    features = tmp_path / "features.csv"
    assert main(["extract", "--dataset", str(tmp_path / "a"), "--out", str(features)]) == EXIT_OK
    X, y, names = read_features(str(features))
    assert X.shape == (1, 80)
    assert list(y) == ["circle"]
    assert names[0] == "s1_p1_amplitude"


@pytest.mark.slow
def test_full_pipeline(tmp_path, capsys):
    data, features, model = tmp_path / "data", tmp_path / "features.csv", tmp_path / "model.json"
    assert main(["simulate", "--runs-per-object", "3", "--seed", "1", "--workers", "2", "--out", str(data)]) == EXIT_OK
    assert main(["extract", "--dataset", str(data), "--out", str(features)]) == EXIT_OK
    assert main(["train", "--features", str(features), "--out", str(model)]) == EXIT_OK
    assert main(["eval", "--features", str(features), "--model", str(model),
                 "--report", str(tmp_path / "report.json")]) == EXIT_OK
    output = capsys.readouterr().out
    assert "Subspace KNN" in output
    assert "Linear Discriminant" in output

    report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert sum(map(sum, report['subspace_knn']['confusion'])) == 9

    plots = tmp_path / "plots"
    assert main(["plot", "--trace", str(data / "hexagon_001.csv"), "--channels", "4,5", "--out", str(plots)]) == EXIT_OK
    assert main(["plot", "--features", str(features), "--out", str(plots)]) == EXIT_OK
    assert {"hexagon_001_heatmap.svg", "hexagon_001_channels.svg", "features.svg"} <= set(os.listdir(plots))
