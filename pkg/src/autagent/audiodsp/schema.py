"""Per-tool JSON schemas and serializers for tool outputs."""

from __future__ import annotations

import json
from typing import Any, Sequence

import jsonschema

from ..core import TOOL_NAMES, AutagError, ToolOutput
from .chords import ChordSegment
from .pitch import PitchPoint


class SchemaViolation(AutagError):
    pass


def _envelope(tool_id: int, output: dict) -> dict:
    return {
        "type": "object",
        "properties": {"tool": {"const": TOOL_NAMES[tool_id]}, "output": output},
        "required": ["tool", "output"],
        "additionalProperties": False,
    }


_TEXT = {"type": "string"}
_CHORD_ITEM = {
    "type": "object",
    "properties": {
        "timestamp": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2, "maxItems": 2},
        "value": {"type": "string", "pattern": r"^(C|C#|D|D#|E|F|F#|G|G#|A|A#|B):(maj|min)$"},
    },
    "required": ["timestamp", "value"],
    "additionalProperties": False,
}
_PITCH_ITEM = {
    "type": "object",
    "properties": {
        "timestamp": {"type": "number", "minimum": 0},
        "fundamental frequency": {"type": "string", "pattern": r"^\d+\.\d{2} Hz$"},
    },
    "required": ["timestamp", "fundamental frequency"],
    "additionalProperties": False,
}

TOOL_SCHEMAS: dict[int, dict] = {
    0: _envelope(0, _TEXT),
    1: _envelope(1, _TEXT),
    2: _envelope(2, {"type": "array", "items": _CHORD_ITEM}),
    3: _envelope(3, {"type": "string", "pattern": r"^\d+\.\d{2}$"}),
    4: _envelope(4, {"type": "array", "items": _PITCH_ITEM}),
    5: _envelope(5, {"type": "string", "pattern": r"^[^,\s][^,]*(, [^,\s][^,]*)*$"}),
}

_KEY_ORDER = {2: ("timestamp", "value"), 4: ("timestamp", "fundamental frequency")}


def _tool_id_of(obj: Any) -> int:
    if not isinstance(obj, dict) or obj.get("tool") not in TOOL_NAMES:
        raise SchemaViolation(f"unknown or missing tool name in {obj!r:.80}")
    return TOOL_NAMES.index(obj["tool"])


def validate_tool_json(obj: Any, tool_id: int | None = None) -> int:
    """Check schema and printed key order; returns the tool id."""
    tid = _tool_id_of(obj) if tool_id is None else tool_id
    try:
        jsonschema.validate(obj, TOOL_SCHEMAS[tid])
    except jsonschema.ValidationError as exc:
        raise SchemaViolation(f"{TOOL_NAMES[tid]}: {exc.message}") from exc
    if tuple(obj) != ("tool", "output"):
        raise SchemaViolation(f"{TOOL_NAMES[tid]}: keys must be ordered tool, output")
    order = _KEY_ORDER.get(tid)
    if order:
        for item in obj["output"]:
            if tuple(item) != order:
                raise SchemaViolation(f"{TOOL_NAMES[tid]}: item keys must be ordered {', '.join(order)}")
    if tid == 2:
        for item in obj["output"]:
            start, end = item["timestamp"]
            if not start < end:
                raise SchemaViolation("chord segment start must precede end")
    if tid == 4:
        times = [item["timestamp"] for item in obj["output"]]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise SchemaViolation("pitch timestamps must increase strictly")
    return tid


def _layout(value: Any, depth: int) -> str:
    """Four-space indented JSON with scalar-only arrays kept on one line."""
    pad, inner = " " * 4 * depth, " " * 4 * (depth + 1)
    if isinstance(value, dict):
        if not value:
            return "{}"
        body = ",\n".join(f"{inner}{json.dumps(k, ensure_ascii=False)}: {_layout(v, depth + 1)}" for k, v in value.items())
        return "{\n" + body + "\n" + pad + "}"
    if isinstance(value, list):
        if all(not isinstance(v, (dict, list)) for v in value):
            return json.dumps(value, ensure_ascii=False)
        return "[\n" + ",\n".join(inner + _layout(v, depth + 1) for v in value) + "\n" + pad + "]"
    return json.dumps(value, ensure_ascii=False)


def dumps(output: ToolOutput) -> str:
    obj = output.to_json_obj()
    validate_tool_json(obj, output.tool_id)
    return _layout(obj, 0)


def parse_tool_json(text: str, tool_id: int | None = None) -> ToolOutput:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"tool output is not JSON: {exc.msg}") from exc
    tid = validate_tool_json(obj, tool_id)
    return ToolOutput(tid, TOOL_NAMES[tid], obj["output"])


def text_output(tool_id: int, text: str) -> ToolOutput:
    return ToolOutput(tool_id, TOOL_NAMES[tool_id], str(text))


def chord_output(segments: Sequence[ChordSegment]) -> ToolOutput:
    payload = [{"timestamp": [s.start, s.end], "value": s.label} for s in segments]
    return ToolOutput(2, TOOL_NAMES[2], payload)


def tempo_output(bpm: float) -> ToolOutput:
    return ToolOutput(3, TOOL_NAMES[3], f"{bpm:.2f}")


def pitch_output(points: Sequence[PitchPoint]) -> ToolOutput:
    payload = [{"timestamp": round(p.timestamp, 3), "fundamental frequency": f"{p.f0:.2f} Hz"} for p in points]
    return ToolOutput(4, TOOL_NAMES[4], payload)


def sound_output(labels: Sequence[str]) -> ToolOutput:
    return ToolOutput(5, TOOL_NAMES[5], ", ".join(labels))
