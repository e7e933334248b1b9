"""Test-signal generators with known ground truth."""

from __future__ import annotations

import numpy as np

from .audio import DEFAULT_SR, AudioBuffer, InvalidParameter

PEAK = 0.9
CLICK_SECONDS = 0.005
PITCH_CLASSES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")
QUALITY_INTERVALS = {"maj": (0, 4, 7), "min": (0, 3, 7)}


def midi_to_hz(note: float) -> float:
    return 440.0 * 2.0 ** ((note - 69) / 12.0)


def triad_frequencies(root: str, quality: str, octave: int = 4) -> tuple[float, float, float]:
    if root not in PITCH_CLASSES:
        raise InvalidParameter(f"root must be one of {PITCH_CLASSES} (sharps only), got {root!r}")
    if quality not in QUALITY_INTERVALS:
        raise InvalidParameter(f"quality must be 'maj' or 'min', got {quality!r}")
    base = 12 * (octave + 1) + PITCH_CLASSES.index(root)
    return tuple(midi_to_hz(base + i) for i in QUALITY_INTERVALS[quality])


def _normalize(x: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(x)) if x.size else 0.0
    return x * (PEAK / peak) if peak > 0 else x


def _time(duration: float, sr: int) -> np.ndarray:
    if not duration > 0:
        raise InvalidParameter("duration must be positive")
    if sr <= 0:
        raise InvalidParameter("sample rate must be positive")
    return np.arange(int(round(duration * sr))) / sr


def tone(f0: float, duration: float = 1.0, sr: int = DEFAULT_SR) -> AudioBuffer:
    if not 30 <= f0 < sr / 2:
        raise InvalidParameter(f"f0 must lie in [30, {sr / 2}) Hz")
    t = _time(duration, sr)
    return AudioBuffer(_normalize(np.sin(2 * np.pi * f0 * t)), sr)


def click_track(bpm: float, duration: float = 8.0, sr: int = DEFAULT_SR, rng=None) -> AudioBuffer:
    """5 ms exponentially decaying noise bursts every 60/bpm seconds from t=0."""
    if not 40 <= bpm <= 220:
        raise InvalidParameter("bpm must lie in [40, 220]")
    rng = np.random.default_rng(0) if rng is None else rng
    t = _time(duration, sr)
    x = np.zeros_like(t)
    n_click = max(1, int(round(CLICK_SECONDS * sr)))
    decay = np.exp(-np.arange(n_click) / (n_click / 5.0))
    period = 60.0 / bpm
    for onset in np.arange(0.0, duration, period):
        i = int(round(onset * sr))
        seg = x[i : i + n_click]
        seg += rng.uniform(-1, 1, seg.size) * decay[: seg.size]
    return AudioBuffer(_normalize(x), sr)


def triad(root: str, quality: str = "maj", duration: float = 3.0, sr: int = DEFAULT_SR) -> AudioBuffer:
    freqs = triad_frequencies(root, quality)
    t = _time(duration, sr)
    x = sum(np.sin(2 * np.pi * f * t) for f in freqs)
    return AudioBuffer(_normalize(x), sr)


def noise(duration: float = 2.0, sr: int = DEFAULT_SR, rng=None) -> AudioBuffer:
    rng = np.random.default_rng(0) if rng is None else rng
    t = _time(duration, sr)
    return AudioBuffer(_normalize(rng.standard_normal(t.size)), sr)


def am_tone(
    f0: float = 180.0, duration: float = 2.0, sr: int = DEFAULT_SR, mod_hz: float = 4.0, harmonics: int = 4
) -> AudioBuffer:
    """Harmonic tone with a syllable-rate amplitude envelope; a crude speech stand-in."""
    if not 30 <= f0 < sr / 2:
        raise InvalidParameter(f"f0 must lie in [30, {sr / 2}) Hz")
    t = _time(duration, sr)
    carrier = sum(np.sin(2 * np.pi * f0 * h * t) / h for h in range(1, harmonics + 1) if f0 * h < sr / 2)
    env = 0.5 * (1 - np.cos(2 * np.pi * mod_hz * t))
    return AudioBuffer(_normalize(carrier * env), sr)


def synth(kind: str, duration: float | None = None, sr: int = DEFAULT_SR, rng=None, **params) -> AudioBuffer:
    """Dispatch by kind name: tone, click_track, triad, noise, am_tone."""
    kinds = {
        "tone": lambda d: tone(float(params["f0"]), d, sr),
        "click_track": lambda d: click_track(float(params["bpm"]), d, sr, rng),
        "triad": lambda d: triad(params["root"], params.get("quality", "maj"), d, sr),
        "noise": lambda d: noise(d, sr, rng),
        "am_tone": lambda d: am_tone(float(params.get("f0", 180.0)), d, sr),
    }
    defaults = {"tone": 1.0, "click_track": 8.0, "triad": 3.0, "noise": 2.0, "am_tone": 2.0}
    if kind not in kinds:
        raise InvalidParameter(f"unknown synth kind {kind!r}")
    try:
        return kinds[kind](defaults[kind] if duration is None else float(duration))
    except KeyError as exc:
        raise InvalidParameter(f"{kind} needs parameter {exc.args[0]!r}") from exc
