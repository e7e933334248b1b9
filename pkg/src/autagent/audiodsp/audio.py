"""Audio buffers and 16-bit PCM WAV I/O."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import AutagError

DEFAULT_SR = 16000
PCM16_SCALE = 32767.0


class AudioError(AutagError):
    pass


class UnsupportedFormat(AudioError):
    pass


class CorruptHeader(AudioError):
    pass


class InvalidParameter(AudioError, ValueError):
    pass


class TooShort(AudioError):
    pass


class SilentInput(AudioError):
    pass


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int = DEFAULT_SR

    def __post_init__(self) -> None:
        x = np.asarray(self.samples, dtype=float).reshape(-1)
        if self.sample_rate <= 0:
            raise InvalidParameter("sample_rate must be positive")
        if not np.all(np.isfinite(x)):
            raise InvalidParameter("audio samples must be finite")
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def rms(self) -> float:
        if self.samples.size == 0:
            return 0.0
        return float(np.sqrt(np.mean(self.samples**2)))


def write_wav(path, audio: AudioBuffer) -> None:
    """Mono 16-bit PCM; ``path`` may also be a binary file object."""
    q = np.round(np.clip(audio.samples, -1.0, 1.0) * PCM16_SCALE).astype("<i2")
    with wave.open(path if hasattr(path, "write") else str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(audio.sample_rate)
        w.writeframes(q.tobytes())


def read_wav(path: str | Path) -> AudioBuffer:
    """Read a 16-bit PCM WAV; stereo is downmixed by averaging the channels."""
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, sr, n = w.getnchannels(), w.getsampwidth(), w.getframerate(), w.getnframes()
            if width != 2:
                raise UnsupportedFormat(f"{path}: {8 * width}-bit samples; only 16-bit PCM is supported")
            if channels not in (1, 2):
                raise UnsupportedFormat(f"{path}: {channels} channels; only mono or stereo is supported")
            raw = w.readframes(n)
    except wave.Error as exc:
        msg = str(exc)
        if "unknown format" in msg:
            raise UnsupportedFormat(f"{path}: non-PCM encoding ({msg})") from exc
        raise CorruptHeader(f"{path}: {msg}") from exc
    except EOFError as exc:
        raise CorruptHeader(f"{path}: truncated header") from exc
    data = np.frombuffer(raw[: len(raw) - len(raw) % (2 * channels)], dtype="<i2").astype(float)
    if channels == 2:
        data = data.reshape(-1, 2).mean(axis=1)
    return AudioBuffer(np.clip(data / PCM16_SCALE, -1.0, 1.0), sr)
