"""Frame-wise f0 from the strongest thresholded STFT peak."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer, InvalidParameter, SilentInput
from .spectral import HOP, N_FFT, frame_times, log_parabolic_peak, stft_magnitude

F_MIN, F_MAX = 50.0, 2000.0
REL_THRESHOLD = 0.1
OUTPUT_STRIDE = 94  # frames; 94 * 256 / 16000 = 1.504 s
SILENCE_RMS = 1e-5


@dataclass(frozen=True)
class PitchPoint:
    timestamp: float
    f0: float

    def __post_init__(self) -> None:
        if not self.f0 > 0:
            raise InvalidParameter("f0 must be positive")


def frame_f0(mag: np.ndarray, sr: int, n_fft: int = N_FFT) -> float | None:
    df = sr / n_fft
    lo, hi = int(np.ceil(F_MIN / df)), min(int(np.floor(F_MAX / df)), mag.size - 2)
    if hi < lo or mag.max() <= 0:
        return None
    k = lo + int(np.argmax(mag[lo : hi + 1]))
    if mag[k] < REL_THRESHOLD * mag.max():
        return None
    return log_parabolic_peak(mag, k) * df


def track_pitch_frames(audio: AudioBuffer) -> list[PitchPoint]:
    """Every non-silent frame's estimate at full hop resolution."""
    if audio.samples.size == 0:
        raise InvalidParameter("empty audio")
    if audio.rms() < SILENCE_RMS:
        raise SilentInput("input is silent")
    mag = stft_magnitude(audio.samples)
    times = frame_times(mag.shape[0], audio.sample_rate)
    frame_rms = np.sqrt(np.mean(mag**2, axis=1)) / N_FFT
    floor = SILENCE_RMS
    points = []
    for t, m, r in zip(times, mag, frame_rms):
        if r < floor:
            continue
        f = frame_f0(m, audio.sample_rate)
        if f is not None and f > 0:
            points.append(PitchPoint(float(t), float(f)))
    return points


def track_pitch(audio: AudioBuffer, stride: int = OUTPUT_STRIDE) -> list[PitchPoint]:
    hop_s = HOP / audio.sample_rate
    keep = []
    for p in track_pitch_frames(audio):
        idx = int(round(p.timestamp / hop_s))
        if idx % stride == 0:
            keep.append(PitchPoint(round(p.timestamp, 3), p.f0))
    return keep
