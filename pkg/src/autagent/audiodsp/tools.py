"""Dispatch from tool id or name to an analyzer or adapter."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

from ..core import TOOL_NAMES, ToolOutput
from .audio import AudioBuffer, read_wav
from .chords import recognize_chords
from .classify import classify_sound
from .external import EXTERNAL_TOOLS, Adapter, run_external_tool
from .pitch import track_pitch
from .schema import chord_output, pitch_output, sound_output, tempo_output
from .tempo import estimate_tempo

TOOL_ALIASES = {
    "asr": 0,
    "speech": 0,
    "emotion": 1,
    "chord": 2,
    "chords": 2,
    "tempo": 3,
    "bpm": 3,
    "pitch": 4,
    "f0": 4,
    "sound": 5,
    "classify": 5,
}


def resolve_tool(name: str | int) -> int:
    if isinstance(name, int) or str(name).isdigit():
        tid = int(name)
        if not 0 <= tid < len(TOOL_NAMES):
            raise ValueError(f"tool id {tid} outside [0, {len(TOOL_NAMES)})")
        return tid
    key = str(name).strip().lower()
    for i, n in enumerate(TOOL_NAMES):
        if key == n.lower():
            return i
    if key in TOOL_ALIASES:
        return TOOL_ALIASES[key]
    raise ValueError(f"unknown tool {name!r}; use an id 0-{len(TOOL_NAMES) - 1} or one of {sorted(TOOL_ALIASES)}")


def analyze(tool_id: int, audio: AudioBuffer) -> ToolOutput:
    if tool_id == 2:
        return chord_output(recognize_chords(audio))
    if tool_id == 3:
        return tempo_output(estimate_tempo(audio))
    if tool_id == 4:
        return pitch_output(track_pitch(audio))
    if tool_id == 5:
        return sound_output(classify_sound(audio))
    raise ValueError(f"tool {tool_id} has no built-in analyzer")


def run_tool(tool_id: int, audio_path: str | Path, adapters: Mapping[int, Adapter] | None = None) -> ToolOutput:
    if tool_id in EXTERNAL_TOOLS:
        return run_external_tool(tool_id, audio_path, (adapters or {}).get(tool_id))
    return analyze(tool_id, read_wav(audio_path))
