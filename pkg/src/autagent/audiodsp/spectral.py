"""Shared STFT front end and peak refinement."""

from __future__ import annotations

import numpy as np

N_FFT = 1024
HOP = 256


def frame_times(n_frames: int, sr: int, hop: int = HOP) -> np.ndarray:
    return np.arange(n_frames) * hop / sr


def stft_magnitude(x: np.ndarray, n_fft: int = N_FFT, hop: int = HOP) -> np.ndarray:
    """Hann-windowed magnitude spectrogram, frames x bins, frames starting at sample 0."""
    x = np.asarray(x, dtype=float)
    if x.size < n_fft:
        x = np.pad(x, (0, n_fft - x.size))
    frames = np.lib.stride_tricks.sliding_window_view(x, n_fft)[::hop]
    window = np.hanning(n_fft + 1)[:-1]
    return np.abs(np.fft.rfft(frames * window, axis=1))


def parabolic_offset(left: float, center: float, right: float) -> float:
    """Vertex offset in (-0.5, 0.5) bins of the parabola through three samples."""
    denom = left - 2.0 * center + right
    if denom >= 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))


def log_parabolic_peak(mag: np.ndarray, k: int) -> float:
    """Fractional bin of the peak at ``k`` refined on log magnitudes."""
    if k <= 0 or k >= mag.size - 1:
        return float(k)
    a, b, c = np.log(np.maximum(mag[k - 1 : k + 2], 1e-300))
    return k + parabolic_offset(a, b, c)
