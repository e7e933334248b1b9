"""Audio analysis tools, WAV I/O and test-signal synthesis."""

from .audio import (
    AudioBuffer,
    AudioError,
    CorruptHeader,
    InvalidParameter,
    SilentInput,
    TooShort,
    UnsupportedFormat,
    read_wav,
    write_wav,
)
from .chords import ChordSegment, recognize_chords
from .classify import classify_sound
from .external import AdapterFailure, AdapterNotConfigured, AdapterSpec, MockAdapter, run_external_tool
from .pitch import PitchPoint, track_pitch
from .schema import SchemaViolation, dumps, parse_tool_json, validate_tool_json
from .tempo import estimate_tempo
from .tools import analyze, resolve_tool, run_tool
