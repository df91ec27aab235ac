"""Tests for the SVG figures."""

import numpy as np
import pytest

from plotting import plot_channels, plot_feature_matrix, plot_heatmap, plot_peak_markers


def _trace():
    t = np.arange(1500) / 45.0
    pressures = np.column_stack([0.5 * np.exp(-0.5 * ((t - 10.0 - c) / 0.5) ** 2) for c in range(10)])
    return t, pressures


def test_figures_are_written(tmp_path):
    t, pressures = _trace()
    paths = [
        plot_heatmap(t, pressures, str(tmp_path / "heatmap.svg"), title="circle"),
        plot_channels(t, pressures, [1, 2], str(tmp_path / "channels.svg"), window=None),
        plot_peak_markers(t, pressures, 3, str(tmp_path / "peaks.svg")),
    ]
    for path in paths:
        with open(path, encoding="utf-8") as f:
            assert "<svg" in f.read()


def test_same_data_same_file(tmp_path):
    t, pressures = _trace()
    a = plot_heatmap(t, pressures, str(tmp_path / "a.svg"))
    b = plot_heatmap(t, pressures, str(tmp_path / "b.svg"))
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()


def test_unknown_channel(tmp_path):
    t, pressures = _trace()
    with pytest.raises(ValueError):
        plot_channels(t, pressures, [11], str(tmp_path / "x.svg"))
    with pytest.raises(ValueError):
        plot_feature_matrix(np.zeros((3, 80)), ["circle"] * 3, str(tmp_path / "x.svg"), channels=[0])
