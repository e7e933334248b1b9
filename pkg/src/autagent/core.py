"""Shared domain types, feature schema and the answer-tag text protocol."""

from __future__ import annotations

import hashlib
import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

NUM_TOOLS = 6

# Index i is tool T(i+1); names are the exact "tool" strings of the JSON outputs.
TOOL_NAMES: tuple[str, ...] = (
    "automatic-speech-recognition",
    "emotion recognition",
    "chord_recognition",
    "Tempo Estimation",
    "Pitch Tracking",
    "Sound Classification",
)

TOOL_LABELS: tuple[str, ...] = (
    "Automatic Speech Recognition",
    "Emotion Recognition",
    "Chord Recognition",
    "Tempo Estimation",
    "Pitch Tracking",
    "Sound Classification",
)

NUM_QUERY_TYPES = 4
FEATURE_NAMES: tuple[str, ...] = (
    "cat_sound",
    "cat_music",
    "cat_speech",
    "qt_content",
    "qt_rhythm",
    "qt_tonal",
    "qt_general",
    "difficulty",
)
FEATURE_DIM = len(FEATURE_NAMES)
DIFFICULTY_INDEX = FEATURE_DIM - 1


class AutagError(Exception):
    """Base class for all package errors."""


class MissingAnswerTag(AutagError):
    pass


class MalformedSelection(AutagError):
    pass


class DimensionMismatch(AutagError, ValueError):
    pass


class Category(str, Enum):
    SOUND = "Sound"
    MUSIC = "Music"
    SPEECH = "Speech"

    @property
    def index(self) -> int:
        return list(Category).index(self)

    @classmethod
    def from_index(cls, i: int) -> "Category":
        return list(cls)[i]


CATEGORIES: tuple[Category, ...] = tuple(Category)


@dataclass(frozen=True)
class ToolSet:
    """An agent action: a set of tool indices in ``[0, k)``. Empty means No-Tool."""

    members: tuple[int, ...] = ()
    k: int = NUM_TOOLS

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        canon = tuple(sorted(set(int(m) for m in self.members)))
        for m in canon:
            if not 0 <= m < self.k:
                raise ValueError(f"tool index {m} outside [0, {self.k})")
        object.__setattr__(self, "members", canon)

    @classmethod
    def of(cls, members: Iterable[int], k: int = NUM_TOOLS) -> "ToolSet":
        return cls(tuple(members), k)

    @classmethod
    def full(cls, k: int = NUM_TOOLS) -> "ToolSet":
        return cls(tuple(range(k)), k)

    @classmethod
    def from_mask(cls, mask: Sequence[bool] | np.ndarray) -> "ToolSet":
        return cls(tuple(i for i, b in enumerate(mask) if b), len(mask))

    @classmethod
    def from_bits(cls, bits: int, k: int = NUM_TOOLS) -> "ToolSet":
        return cls(tuple(i for i in range(k) if bits >> i & 1), k)

    def mask(self) -> np.ndarray:
        m = np.zeros(self.k, dtype=bool)
        m[list(self.members)] = True
        return m

    def serialize(self) -> str:
        return ",".join(str(m) for m in self.members)

    def __contains__(self, item: object) -> bool:
        return item in self.members

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __repr__(self) -> str:
        return "{" + ",".join(map(str, self.members)) + "}"


@dataclass(frozen=True)
class TaskInstance:
    id: str
    category: Category
    context: tuple[float, ...]
    required_tools: ToolSet
    answer_key: str = ""
    audio_path: str | None = None
    question_text: str | None = None
    query_type: int = NUM_QUERY_TYPES - 1

    def __post_init__(self) -> None:
        ctx = tuple(float(x) for x in self.context)
        if not all(math.isfinite(x) for x in ctx):
            raise ValueError(f"task {self.id}: non-finite context")
        object.__setattr__(self, "context", ctx)

    @property
    def difficulty(self) -> float:
        return self.context[DIFFICULTY_INDEX]

    def context_array(self) -> np.ndarray:
        return np.asarray(self.context, dtype=float)


@dataclass(frozen=True)
class ToolOutput:
    tool_id: int
    tool_name: str
    payload: Any = field(default=None)

    def __post_init__(self) -> None:
        if not 0 <= self.tool_id < len(TOOL_NAMES):
            raise ValueError(f"unknown tool id {self.tool_id}")
        if self.tool_name != TOOL_NAMES[self.tool_id]:
            raise ValueError(
                f"tool {self.tool_id} must be named {TOOL_NAMES[self.tool_id]!r}, got {self.tool_name!r}"
            )

    def to_json_obj(self) -> dict[str, Any]:
        return {"tool": self.tool_name, "output": self.payload}


@dataclass(frozen=True)
class Verdict:
    base_correct: bool
    tool_correct: bool


def encode_context(category: Category, query_type: int, difficulty: float) -> tuple[float, ...]:
    """One-hot category, one-hot query type, then the difficulty scalar."""
    if not 0 <= query_type < NUM_QUERY_TYPES:
        raise ValueError(f"query type {query_type} outside [0, {NUM_QUERY_TYPES})")
    x = [0.0] * FEATURE_DIM
    x[category.index] = 1.0
    x[len(CATEGORIES) + query_type] = 1.0
    x[DIFFICULTY_INDEX] = float(difficulty)
    return tuple(x)


def feature_schema_hash(k: int = NUM_TOOLS, names: Sequence[str] = FEATURE_NAMES) -> str:
    blob = f"K={k};" + ",".join(names)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


_ANSWER_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL)


def parse_answer_tag(text: str) -> str:
    """Content of the first complete ``<answer>...</answer>`` pair, whitespace-trimmed."""
    m = _ANSWER_RE.search(text)
    if m is None:
        raise MissingAnswerTag("no <answer></answer> pair in text")
    return m.group(1).strip()


def parse_tool_indices(text: str, k: int = NUM_TOOLS) -> ToolSet:
    if k < 1:
        raise ValueError("k must be >= 1")
    body = parse_answer_tag(text)
    if body == "" or body.lower() == "none":
        return ToolSet((), k)
    picked: list[int] = []
    for raw in body.split(","):
        tok = raw.strip()
        if not re.fullmatch(r"[+-]?\d+", tok):
            raise MalformedSelection(f"non-integer tool index {tok!r}")
        idx = int(tok)
        if not 0 <= idx < k:
            raise MalformedSelection(f"tool index {idx} outside [0, {k})")
        picked.append(idx)
    return ToolSet(tuple(picked), k)


def selection_or_empty(text: str, k: int = NUM_TOOLS) -> ToolSet:
    """Lenient variant for untrusted model output: any parse failure maps to No-Tool."""
    try:
        return parse_tool_indices(text, k)
    except (MissingAnswerTag, MalformedSelection) as exc:
        log.warning("unparseable tool selection (%s); using no tools", exc)
        return ToolSet((), k)


def normalize_answer(text: str) -> str:
    return text.strip().casefold()


def answers_match(predicted: str, *accepted: str) -> bool:
    """Exact equality after trim and case-fold against any accepted form."""
    p = normalize_answer(predicted)
    return any(p == normalize_answer(a) for a in accepted if a is not None)
