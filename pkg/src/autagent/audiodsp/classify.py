"""Nearest-centroid sound tagger over synthesized prototype classes.

A stand-in for a pretrained tagger: four features, four classes, with
centroids computed from generated signals, so every label is reproducible.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .audio import DEFAULT_SR, AudioBuffer, SilentInput, TooShort
from .spectral import HOP, N_FFT, stft_magnitude
from . import synth

MIN_SECONDS = 0.5
SILENCE_RMS = 1e-5
SECOND_LABEL_RATIO = 1.25
FEATURES = ("log_centroid", "flatness", "zcr", "onset_rate")
CLASSES = ("tone", "click/percussive", "noise", "speech-like")


def features(audio: AudioBuffer) -> np.ndarray:
    """[log2 spectral centroid, median flatness, zero-crossing rate, onsets per second]."""
    sr = audio.sample_rate
    mag = stft_magnitude(audio.samples)
    power = mag**2
    energy = power.sum(axis=1)
    active = energy > max(energy.max() * 1e-4, 1e-12)
    freqs = np.arange(mag.shape[1]) * sr / N_FFT
    centroid = (power[active] @ freqs).sum() / power[active].sum()
    p = power[active] + 1e-12
    flatness = float(np.median(np.exp(np.mean(np.log(p), axis=1)) / np.mean(p, axis=1)))
    x = audio.samples
    zcr = float(np.mean(np.signbit(x[1:]) != np.signbit(x[:-1])))
    flux = np.concatenate([[0.0], np.maximum(np.diff(mag, axis=0), 0).sum(axis=1)])
    # relative to its own max and to the typical frame level, so steady tones yield no onsets
    thresh = max(0.3 * flux.max(), 0.2 * mag.sum(axis=1).mean())
    is_onset = (flux[1:-1] > thresh) & (flux[1:-1] >= flux[:-2]) & (flux[1:-1] > flux[2:])
    rate = float(is_onset.sum() / audio.duration)
    return np.array([np.log2(max(centroid, 1.0)), flatness, zcr, rate])


def _prototype_signals(sr: int) -> dict[str, list[AudioBuffer]]:
    return {
        "tone": [synth.tone(f, 2.0, sr) for f in (220.0, 440.0, 880.0)],
        "click/percussive": [
            synth.click_track(b, 4.0, sr, np.random.default_rng(s)) for s, b in enumerate((90, 120, 150))
        ],
        "noise": [synth.noise(2.0, sr, np.random.default_rng(s)) for s in range(3)],
        "speech-like": [synth.am_tone(f, 2.0, sr) for f in (140.0, 190.0, 240.0)],
    }


@lru_cache(maxsize=4)
def prototypes(sr: int = DEFAULT_SR) -> tuple[np.ndarray, np.ndarray]:
    """(class centroids, per-feature scale) built from synthesized signals."""
    feats = {name: np.array([features(a) for a in sigs]) for name, sigs in _prototype_signals(sr).items()}
    centroids = np.array([feats[c].mean(axis=0) for c in CLASSES])
    scale = np.vstack(list(feats.values())).std(axis=0)
    return centroids, np.where(scale > 0, scale, 1.0)


def class_distances(audio: AudioBuffer) -> dict[str, float]:
    centroids, scale = prototypes(audio.sample_rate)
    d = np.linalg.norm((centroids - features(audio)) / scale, axis=1)
    return dict(zip(CLASSES, map(float, d)))


def classify_sound(audio: AudioBuffer) -> list[str]:
    """Best class first; a runner-up is added only when nearly as close."""
    if audio.duration < MIN_SECONDS:
        raise TooShort(f"sound classification needs >= {MIN_SECONDS} s")
    if audio.rms() < SILENCE_RMS:
        raise SilentInput("input is silent")
    ranked = sorted(class_distances(audio).items(), key=lambda kv: kv[1])
    labels = [ranked[0][0]]
    if ranked[1][1] <= SECOND_LABEL_RATIO * ranked[0][1]:
        labels.append(ranked[1][0])
    return labels
