"""
Static SVG figures for tactile traces: channel heatmaps, channel line
plots and peak-marker plots.
"""

import logging
from typing import Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

import config  # noqa: E402
from feature_extraction import detect_peaks, peak_threshold, smooth  # noqa: E402


logger = logging.getLogger(__name__)

DEFAULT_WINDOW_S = (18.0, 32.0)

plt.rcParams.update({'font.size': 10, 'font.family': 'serif', 'svg.hashsalt': 'etroll'})


def _check_channels(channels: Sequence[int], count: int) -> None:
    bad = [c for c in channels if not 1 <= c <= count]
    if bad:
        raise ValueError(f"Unknown channel index {bad[0]}; channels are 1..{count}")


def _save(fig, path: str) -> str:
    fig.savefig(path, format="svg", bbox_inches="tight", metadata={'Date': None})
    plt.close(fig)
    logger.info(f"Wrote {path}")
    return path


def plot_heatmap(times: np.ndarray, pressures: np.ndarray, path: str,
                 title: str = "", vmax: float = config.SATURATION) -> str:
    """Channel-versus-time heatmap of calibrated pressures."""
    pressures = np.asarray(pressures, dtype=float)
    fig, ax = plt.subplots(figsize=(10, 3))
    extent = (float(times[0]), float(times[-1]), pressures.shape[1] + 0.5, 0.5)
    image = ax.imshow(pressures.T, aspect="auto", cmap="inferno", vmin=0.0, vmax=vmax,
                      extent=extent, interpolation="nearest")
    ax.set(xlabel="Time (s)", ylabel="Sensor", title=title,
           yticks=np.arange(1, pressures.shape[1] + 1))
    fig.colorbar(image, ax=ax, label="Pressure (units)")
    return _save(fig, path)


def plot_channels(times: np.ndarray, pressures: np.ndarray, channels: Sequence[int], path: str,
                  window: Optional[Tuple[float, float]] = DEFAULT_WINDOW_S, title: str = "") -> str:
    """Line plot of selected channels (1-based) over a time window."""
    pressures = np.asarray(pressures, dtype=float)
    _check_channels(channels, pressures.shape[1])
    times = np.asarray(times, dtype=float)
    mask = np.ones(len(times), dtype=bool) if window is None else (times >= window[0]) & (times <= window[1])

    fig, ax = plt.subplots(figsize=(8, 3))
    for channel in channels:
        ax.plot(times[mask], pressures[mask, channel - 1], label=f"Sensor {channel}")
    ax.set(xlabel="Time (s)", ylabel="Pressure (units)", title=title)
    ax.legend(loc="upper right")
    return _save(fig, path)


def plot_peak_markers(times: np.ndarray, pressures: np.ndarray, channel: int, path: str,
                      settings: Optional[config.FeatureSettings] = None, title: str = "") -> str:
    """
    Smoothed channel with its detected peaks marked.

    Startpoint and endpoint get triangles, the peak maximum a circle and
    the temporal midpoint a diamond.
    """
    settings = settings or config.FeatureSettings()
    pressures = np.asarray(pressures, dtype=float)
    _check_channels([channel], pressures.shape[1])
    series = smooth(pressures[:, channel - 1], settings.window)
    threshold = peak_threshold(series, settings.threshold_units, settings.threshold_fraction)
    peaks = detect_peaks(series, times, threshold)

    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(times, series, color="black", linewidth=1, label=f"Sensor {channel}")
    ax.axhline(threshold, color="grey", linestyle=":", linewidth=1, label="Threshold")
    for i, peak in enumerate(peaks):
        first = i == 0
        ax.plot([peak.start], [threshold], "^", color="tab:green", label="Startpoint" if first else None)
        ax.plot([peak.end], [threshold], "v", color="tab:red", label="Endpoint" if first else None)
        ax.plot([peak.ttp], [peak.amplitude], "o", color="tab:blue", label="Peak" if first else None)
        ax.plot([(peak.start + peak.end) / 2.0], [threshold], "D", color="tab:orange",
                label="Midpoint" if first else None)
    ax.set(xlabel="Time (s)", ylabel="Pressure (units)", title=title)
    ax.legend(loc="upper right")
    return _save(fig, path)


def plot_feature_matrix(X: np.ndarray, labels: Sequence[str], path: str,
                        channels: Optional[Sequence[int]] = None,
                        peaks: int = config.PEAKS_PER_CHANNEL) -> str:
    """Samples x features heatmap, columns standardised, optionally limited to some channels."""
    X = np.asarray(X, dtype=float)
    per_channel = 4 * peaks
    count = X.shape[1] // per_channel
    if channels:
        _check_channels(channels, count)
        columns = np.concatenate([np.arange((c - 1) * per_channel, c * per_channel) for c in channels])
        X = X[:, columns]

    std = X.std(axis=0)
    scaled = (X - X.mean(axis=0)) / np.where(std > 0, std, 1.0)
    order = np.argsort(np.asarray(labels), kind="stable")

    fig, ax = plt.subplots(figsize=(10, 5))
    image = ax.imshow(scaled[order], aspect="auto", cmap="coolwarm", vmin=-3, vmax=3,
                      interpolation="nearest")
    ax.set(xlabel="Feature", ylabel="Run (sorted by label)")
    fig.colorbar(image, ax=ax, label="Standardised value")
    return _save(fig, path)
