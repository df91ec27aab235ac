"""
Peak features from tactile traces.

Each channel is smoothed with a centred moving average and segmented
into above-threshold peaks. The two largest peaks per channel give
amplitude, time-to-peak, width and skewness: 10 x 2 x 4 = 80 features.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

import config
from errors import SeriesTooShortError, ZeroWidthError


logger = logging.getLogger(__name__)

FEATURE_NAMES = ("amplitude", "ttp", "width", "skewness")


@dataclass(frozen=True)
class Peak:
    start: float
    end: float
    ttp: float
    amplitude: float
    start_index: int
    end_index: int
    peak_index: int


@dataclass(frozen=True)
class PeakFeature:
    amplitude: float
    ttp: float
    width: float
    skewness: float

    @classmethod
    def from_peak(cls, peak: Peak) -> "PeakFeature":
        return cls(peak.amplitude, peak.ttp, peak.end - peak.start,
                   skewness(peak.start, peak.end, peak.ttp))

    def as_tuple(self):
        return (self.amplitude, self.ttp, self.width, self.skewness)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    label: Optional[str] = None

    def __len__(self) -> int:
        return len(self.values)


def feature_names(channels: int = 10, peaks: int = config.PEAKS_PER_CHANNEL) -> List[str]:
    return [f"s{c + 1}_p{p + 1}_{name}"
            for c in range(channels) for p in range(peaks) for name in FEATURE_NAMES]


def smooth(series: np.ndarray, window: int = config.SMOOTHING_WINDOW) -> np.ndarray:
    """
    Centred moving average with shrinking windows at the edges.

    Sample i averages indices i - window//2 through i + window - window//2 - 1.
    Works on 1-D series or along axis 0 of a frames x channels matrix.
    """
    x = np.asarray(series, dtype=float)
    n = x.shape[0]
    if n < window:
        raise SeriesTooShortError(f"Series of {n} samples is shorter than the {window}-sample window")

    half = window // 2
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + window - half, n)

    csum = np.concatenate([np.zeros((1,) + x.shape[1:]), np.cumsum(x, axis=0)])
    counts = (hi - lo).reshape((-1,) + (1,) * (x.ndim - 1))
    return (csum[hi] - csum[lo]) / counts


def peak_threshold(series: np.ndarray,
                   units: float = config.PEAK_THRESHOLD_UNITS,
                   fraction: float = config.PEAK_THRESHOLD_FRACTION) -> float:
    peak = float(np.max(series)) if len(series) else 0.0
    return max(units, fraction * peak)


def detect_peaks(
    series: np.ndarray,
    times: Optional[np.ndarray] = None,
    threshold: Optional[float] = None
) -> List[Peak]:
    """
    Segment a smoothed channel into above-threshold peaks.

    A peak starts at the first sample strictly above the threshold and ends
    at the first later sample strictly below it; samples equal to the
    threshold stay in the peak.

    Args:
        series: Smoothed channel values
        times: Sample times; indices are used when None
        threshold: Detection threshold; max(0.05, 20% of the channel max) when None

    Returns:
        Peaks in time order
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n == 0:
        return []
    t = np.arange(n, dtype=float) if times is None else np.asarray(times, dtype=float)
    if threshold is None:
        threshold = peak_threshold(x)

    dt = t[-1] - t[-2] if n > 1 else 1.0
    above = np.flatnonzero(x > threshold)
    if len(above) == 0:
        return []

    inside = np.concatenate([[False], x >= threshold, [False]]).astype(np.int8)
    edges = np.diff(inside)
    run_starts = np.flatnonzero(edges == 1)
    run_ends = np.flatnonzero(edges == -1)

    peaks = []
    for run_start, run_end in zip(run_starts, run_ends):
        k = np.searchsorted(above, run_start)
        if k == len(above) or above[k] >= run_end:
            continue
        start = int(above[k])
        peak_index = start + int(np.argmax(x[start:run_end]))
        end_time = t[run_end] if run_end < n else t[-1] + dt
        peaks.append(Peak(float(t[start]), float(end_time), float(t[peak_index]),
                          float(x[peak_index]), start, int(run_end), peak_index))
    return peaks


def skewness(start: float, end: float, ttp: float) -> float:
    """Peak skewness: 100 * (temporal midpoint - ttp) / width."""
    if not end > start:
        raise ZeroWidthError(f"Peak end {end} does not follow start {start}")
    return 100.0 * ((start + end) / 2.0 - ttp) / (end - start)


def select_peaks(peaks: Sequence[Peak], count: int = config.PEAKS_PER_CHANNEL) -> List[Peak]:
    """Keep the largest peaks (earlier ttp wins ties), returned in time order."""
    kept = sorted(peaks, key=lambda p: (-p.amplitude, p.ttp))[:count]
    return sorted(kept, key=lambda p: p.ttp)


def extract_features(
    times: np.ndarray,
    pressures: np.ndarray,
    settings: Optional[config.FeatureSettings] = None,
    label: Optional[str] = None
) -> FeatureVector:
    """
    Feature vector from a frames x channels pressure matrix.

    Args:
        times: Frame timestamps (s)
        pressures: Calibrated readings, frames x channels
        settings: Smoothing and threshold settings
        label: Class label to attach

    Returns:
        FeatureVector with channels x peaks x 4 values, channel-major
    """
    settings = settings or config.FeatureSettings()
    pressures = np.asarray(pressures, dtype=float)
    smoothed = smooth(pressures, settings.window)
    per_peak = len(FEATURE_NAMES)
    slots = settings.peaks_per_channel

    values = np.zeros(pressures.shape[1] * slots * per_peak)
    for channel in range(pressures.shape[1]):
        series = smoothed[:, channel]
        threshold = peak_threshold(series, settings.threshold_units, settings.threshold_fraction)
        peaks = detect_peaks(series, times, threshold)
        if len(peaks) > slots:
            logger.debug(f"Channel {channel + 1}: {len(peaks)} peaks, keeping {slots}")
        for slot, peak in enumerate(select_peaks(peaks, slots)):
            offset = (channel * slots + slot) * per_peak
            values[offset:offset + per_peak] = PeakFeature.from_peak(peak).as_tuple()

    return FeatureVector(values, label)


def assemble(trace, settings: Optional[config.FeatureSettings] = None) -> FeatureVector:
    """Feature vector for one SensorTrace."""
    return extract_features(trace.timestamps, trace.pressures, settings, trace.label)
