"""Global tempo from the autocorrelation of a spectral-flux onset envelope."""

from __future__ import annotations

import numpy as np

from .audio import AudioBuffer, SilentInput, TooShort
from .spectral import HOP, N_FFT, parabolic_offset, stft_magnitude

MIN_SECONDS = 2.0
MIN_BPM, MAX_BPM = 40.0, 220.0
PREFERRED = (70.0, 180.0)
TIE_RATIO = 0.9
SILENCE_RMS = 1e-5
SMOOTH = np.hanning(7)[1:-1]  # ~80 ms; evens out peaks at fractional-frame periods


def onset_envelope(audio: AudioBuffer) -> np.ndarray:
    """Half-wave-rectified spectral flux per frame, lightly smoothed, mean removed."""
    mag = stft_magnitude(audio.samples, N_FFT, HOP)
    flux = np.maximum(np.diff(mag, axis=0), 0.0).sum(axis=1)
    flux = np.convolve(np.concatenate([[0.0], flux]), SMOOTH / SMOOTH.sum(), mode="same")
    return flux - flux.mean()


def _peaks(acf: np.ndarray, lo: int, hi: int) -> list[tuple[float, float]]:
    """Local maxima in [lo, hi] as (refined lag, refined height)."""
    out = []
    for lag in range(max(lo, 1), min(hi, acf.size - 2) + 1):
        a, b, c = acf[lag - 1], acf[lag], acf[lag + 1]
        if b > 0 and b >= a and b >= c:
            delta = parabolic_offset(a, b, c)
            out.append((lag + delta, b - 0.25 * (a - c) * delta))
    return out


def _in_window(bpm: float) -> bool:
    return PREFERRED[0] <= bpm <= PREFERRED[1]


def estimate_tempo(audio: AudioBuffer) -> float:
    if audio.duration < MIN_SECONDS:
        raise TooShort(f"tempo estimation needs >= {MIN_SECONDS} s, got {audio.duration:.3f} s")
    if audio.rms() < SILENCE_RMS:
        raise SilentInput("input is silent")
    env = onset_envelope(audio)
    fr = audio.sample_rate / HOP
    lo = int(np.floor(60.0 / MAX_BPM * fr))
    hi = int(np.ceil(60.0 / MIN_BPM * fr))
    n = env.size
    full = np.correlate(env, env, mode="full")[n - 1 :]
    acf = np.zeros(hi + 2)
    acf[: min(full.size, hi + 2)] = full[: hi + 2]
    peaks = _peaks(acf, lo, hi)
    if not peaks:
        raise SilentInput("no periodicity found in the onset envelope")
    best_lag, best_h = max(peaks, key=lambda p: p[1])

    def partner(target: float):
        near = [p for p in peaks if abs(p[0] - target) <= max(1.0, 0.05 * target)]
        return max(near, key=lambda p: p[1]) if near else None

    bpm = 60.0 * fr / best_lag
    for target in (best_lag / 2.0, best_lag * 2.0):
        cand = partner(target)
        if cand is None or cand[1] < TIE_RATIO * best_h:
            continue
        cand_bpm = 60.0 * fr / cand[0]
        if not _in_window(bpm) and _in_window(cand_bpm):
            return cand_bpm
        # Both admissible: a near-equal peak at half the lag means the shorter period is the pulse.
        if _in_window(bpm) and _in_window(cand_bpm) and target < best_lag:
            return cand_bpm
    return bpm
