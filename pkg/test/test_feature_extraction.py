"""Tests for peak detection and the feature vector."""

from types import SimpleNamespace

import numpy as np
import pytest

from errors import SeriesTooShortError, ZeroWidthError
from feature_extraction import (
    Peak,
    assemble,
    detect_peaks,
    feature_names,
    select_peaks,
    skewness,
    smooth,
)


RATE = 45.0


def _bump(t, centre, height, width=0.5):
    return height * np.exp(-0.5 * ((t - centre) / width) ** 2)


def _trace(shift=0.0, scale=1.0, channels=10, frames=1500):
    t = np.arange(frames) / RATE
    columns = [_bump(t, 8.0 + c, 0.4 + 0.02 * c) + _bump(t, 20.0 + c, 0.3) for c in range(channels)]
    return SimpleNamespace(timestamps=t + shift, pressures=scale * np.column_stack(columns), label="circle")


def _oracle(x, threshold):
    """Sample-by-sample reference segmentation."""
    peaks, start = [], None
    for i, v in enumerate(x):
        if start is None and v > threshold:
            start = i
        elif start is not None and v < threshold:
            peaks.append((start, i, start + int(np.argmax(x[start:i]))))
            start = None
    if start is not None:
        peaks.append((start, len(x), start + int(np.argmax(x[start:]))))
    return peaks


class TestSmooth:

    def test_constant_is_unchanged(self):
        assert np.allclose(smooth(np.full(100, 3.0)), 3.0)

    def test_impulse_spreads_over_one_window(self):
        x = np.zeros(100)
        x[50] = 1.0
        y = smooth(x)
        assert np.flatnonzero(y).tolist() == list(range(41, 61))
        assert np.allclose(y[41:61], 1 / 20)

    def test_series_shorter_than_window(self):
        with pytest.raises(SeriesTooShortError):
            smooth(np.ones(10))

    def test_white_noise_std_drops_by_root_window(self):
        x = np.random.default_rng(0).normal(0.0, 1.0, 20000)
        assert np.std(smooth(x)[20:-20]) == pytest.approx(1 / np.sqrt(20), rel=0.1)

    def test_columns_are_smoothed_independently(self):
        x = np.random.default_rng(1).normal(size=(200, 3))
        y = smooth(x)
        for c in range(3):
            assert np.allclose(y[:, c], smooth(x[:, c]))


class TestDetectPeaks:

    def test_flat_series_has_no_peaks(self):
        assert detect_peaks(np.zeros(100)) == []

    def test_triangle(self):
        t = np.arange(900) / RATE
        x = np.maximum(0.0, 0.5 - 0.5 * np.abs(t - 11.0))
        (peak,) = detect_peaks(x, t, threshold=0.2)
        assert peak.start == pytest.approx(10.4, abs=1.5 / RATE)
        assert peak.end == pytest.approx(11.6, abs=1.5 / RATE)
        assert peak.ttp == 11.0
        assert peak.amplitude == pytest.approx(0.5)

    def test_two_peaks_in_time_order(self):
        t = np.arange(900) / RATE
        x = _bump(t, 5.0, 0.3) + _bump(t, 15.0, 0.6)
        peaks = detect_peaks(x, t)
        assert [round(p.ttp) for p in peaks] == [5, 15]

    def test_samples_at_threshold_stay_in_the_peak(self):
        x = np.array([0.0, 0.2, 0.3, 0.2, 0.2, 0.3, 0.1, 0.0])
        (peak,) = detect_peaks(x, threshold=0.2)
        assert (peak.start_index, peak.end_index) == (2, 6)
        assert (peak.start, peak.end) == (2.0, 6.0)

    def test_run_only_touching_threshold_is_not_a_peak(self):
        assert detect_peaks(np.array([0.0, 0.2, 0.2, 0.0]), threshold=0.2) == []

    def test_peak_open_at_the_end(self):
        (peak,) = detect_peaks(np.array([0.0, 0.0, 0.5, 0.6, 0.7]), threshold=0.2)
        assert peak.end == 5.0
        assert peak.ttp == 4.0

    def test_matches_sample_by_sample_segmentation(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            x = np.round(rng.uniform(0.0, 1.0, 50), 1)
            found = [(p.start_index, p.end_index, p.peak_index) for p in detect_peaks(x, threshold=0.5)]
            assert found == _oracle(x, 0.5)

    def test_default_threshold_floor(self):
        x = np.full(50, 0.04)
        x[20:25] = 0.045
        assert detect_peaks(x) == []


class TestSkewness:

    @pytest.mark.parametrize("start, end, ttp, expected", [
        (10.0, 12.0, 11.0, 0.0),
        (10.0, 12.0, 12.0, -50.0),
        (10.0, 14.0, 11.0, 25.0),
    ])
    def test_examples(self, start, end, ttp, expected):
        assert skewness(start, end, ttp) == pytest.approx(expected)

    def test_zero_width(self):
        with pytest.raises(ZeroWidthError):
            skewness(5.0, 5.0, 5.0)


def _peak(ttp, amplitude):
    return Peak(ttp - 1.0, ttp + 1.0, ttp, amplitude, 0, 0, 0)


class TestSelectPeaks:

    def test_keeps_the_two_largest_in_time_order(self):
        kept = select_peaks([_peak(1.0, 0.5), _peak(2.0, 0.3), _peak(3.0, 0.6)])
        assert [p.ttp for p in kept] == [1.0, 3.0]

    def test_ties_go_to_the_earlier_peak(self):
        kept = select_peaks([_peak(3.0, 0.5), _peak(1.0, 0.5), _peak(2.0, 0.5)])
        assert [p.ttp for p in kept] == [1.0, 2.0]


class TestAssemble:

    def test_names_and_length(self):
        names = feature_names()
        assert len(names) == 80
        assert names[:4] == ["s1_p1_amplitude", "s1_p1_ttp", "s1_p1_width", "s1_p1_skewness"]
        assert names[-1] == "s10_p2_skewness"

    def test_two_bumps_per_channel(self):
        vector = assemble(_trace())
        assert len(vector) == 80
        assert vector.label == "circle"
        values = vector.values.reshape(10, 2, 4)
        assert np.all(values[:, :, 0] > 0)
        assert np.allclose(values[:, 0, 1], 8.0 + np.arange(10), atol=0.1)
        assert np.allclose(values[:, 1, 1], 20.0 + np.arange(10), atol=0.1)
        assert np.all(np.abs(values[:, :, 3]) < 10)

    def test_silent_trace_gives_zeros(self):
        trace = SimpleNamespace(timestamps=np.arange(300) / RATE, pressures=np.zeros((300, 10)), label=None)
        assert not assemble(trace).values.any()

    def test_time_shift_moves_only_time_to_peak(self):
        base = assemble(_trace()).values.reshape(10, 2, 4)
        shifted = assemble(_trace(shift=1.0)).values.reshape(10, 2, 4)
        assert np.allclose(shifted[:, :, 1], base[:, :, 1] + 1.0)
        assert np.allclose(shifted[:, :, [0, 2, 3]], base[:, :, [0, 2, 3]], atol=1e-9)

    def test_amplitude_scale_moves_only_amplitude(self):
        base = assemble(_trace()).values.reshape(10, 2, 4)
        scaled = assemble(_trace(scale=2.0)).values.reshape(10, 2, 4)
        assert np.allclose(scaled[:, :, 0], 2.0 * base[:, :, 0])
        assert np.allclose(scaled[:, :, 1:], base[:, :, 1:])
