"""Chroma template chord recognition."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer, InvalidParameter, SilentInput, TooShort
from .spectral import HOP, N_FFT, log_parabolic_peak, stft_magnitude
from .synth import PITCH_CLASSES, QUALITY_INTERVALS

MIN_SECONDS = 1.0
SMOOTH_FRAMES = 9
F_LO, F_HI = 55.0, 5000.0
PEAK_REL = 0.05
SILENCE_RMS = 1e-5
LABEL_RE = re.compile(r"^(C|C#|D|D#|E|F|F#|G|G#|A|A#|B):(maj|min)$")


@dataclass(frozen=True)
class ChordSegment:
    start: float
    end: float
    label: str

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise InvalidParameter(f"segment start {self.start} must precede end {self.end}")
        if not LABEL_RE.match(self.label):
            raise InvalidParameter(f"bad chord label {self.label!r}")


def _templates() -> tuple[list[str], np.ndarray]:
    labels, rows = [], []
    for root in range(12):
        for quality, ivs in QUALITY_INTERVALS.items():
            t = np.zeros(12)
            t[[(root + i) % 12 for i in ivs]] = 1.0
            labels.append(f"{PITCH_CLASSES[root]}:{quality}")
            rows.append(t / np.linalg.norm(t))
    return labels, np.array(rows)


LABELS, TEMPLATES = _templates()


def frame_chroma(mag: np.ndarray, sr: int, n_fft: int = N_FFT) -> np.ndarray:
    """Energy of local spectral peaks folded into 12 pitch classes (C = 0)."""
    df = sr / n_fft
    chroma = np.zeros(12)
    top = mag.max()
    if top <= 0:
        return chroma
    lo, hi = max(1, int(F_LO / df)), min(mag.size - 2, int(F_HI / df))
    seg = mag[lo : hi + 1]
    is_peak = (seg >= mag[lo - 1 : hi]) & (seg > mag[lo + 1 : hi + 2]) & (seg >= PEAK_REL * top)
    for k in np.flatnonzero(is_peak) + lo:
        f = log_parabolic_peak(mag, int(k)) * df
        pc = int(round(12 * np.log2(f / 440.0))) % 12
        chroma[(pc + 9) % 12] += mag[k] ** 2
    return chroma


def _mode_filter(labels: list[int], width: int) -> list[int]:
    half = width // 2
    out = []
    for i in range(len(labels)):
        window = labels[max(0, i - half) : i + half + 1]
        counts = Counter(window)
        best = max(counts.values())
        # ties go to the current label, then to the earliest-appearing one
        out.append(labels[i] if counts[labels[i]] == best else next(l for l in window if counts[l] == best))
    return out


def frame_labels(audio: AudioBuffer) -> tuple[list[int], list[int]]:
    """(frame indices, template indices) for non-silent frames before smoothing."""
    mag = stft_magnitude(audio.samples)
    frame_rms = np.sqrt(np.mean(mag**2, axis=1)) / N_FFT
    idx, lab = [], []
    for i, (m, r) in enumerate(zip(mag, frame_rms)):
        if r < SILENCE_RMS:
            continue
        c = frame_chroma(m, audio.sample_rate)
        norm = np.linalg.norm(c)
        if norm == 0:
            continue
        idx.append(i)
        lab.append(int(np.argmax(TEMPLATES @ (c / norm))))
    return idx, lab


def recognize_chords(audio: AudioBuffer) -> list[ChordSegment]:
    if audio.duration < MIN_SECONDS:
        raise TooShort(f"chord recognition needs >= {MIN_SECONDS} s, got {audio.duration:.3f} s")
    if audio.rms() < SILENCE_RMS:
        raise SilentInput("input is silent")
    idx, lab = frame_labels(audio)
    if not idx:
        return []
    lab = _mode_filter(lab, SMOOTH_FRAMES)
    sr = audio.sample_rate
    runs: list[list[int]] = []  # [first frame, last frame, label]
    for i, l in zip(idx, lab):
        if runs and runs[-1][2] == l and i == runs[-1][1] + 1:
            runs[-1][1] = i
        else:
            runs.append([i, i, l])
    segments = []
    for n, (first, last, l) in enumerate(runs):
        start = first * HOP / sr
        end = runs[n + 1][0] * HOP / sr if n + 1 < len(runs) and runs[n + 1][0] == last + 1 else min(
            audio.duration, (last * HOP + N_FFT) / sr
        )
        s, e = round(start, 1), round(end, 1)
        if s < e:
            segments.append(ChordSegment(s, e, LABELS[l]))
    return segments
