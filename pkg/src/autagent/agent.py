"""External mode: MCQ datasets, a reasoner interface, and the select-run-answer loop.

No network client ships here. A reasoner is either a local command (prompt on
stdin, reply on stdout) or a mock with canned replies.
"""

from __future__ import annotations

import json
import logging
import re
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol, Sequence

import numpy as np

from .audiodsp.audio import AudioError
from .audiodsp.external import Adapter, AdapterFailure
from .audiodsp.schema import dumps
from .audiodsp.tools import run_tool
from .core import (
    AutagError,
    Category,
    MissingAnswerTag,
    TaskInstance,
    ToolSet,
    answers_match,
    encode_context,
    parse_answer_tag,
)
from .policy import PolicyParams, greedy_action
from .prompts import format_question, reasoner_prompt

log = logging.getLogger(__name__)

LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
DEFAULT_DIFFICULTY = 0.5


class DatasetError(AutagError, ValueError):
    pass


@dataclass(frozen=True)
class MCQItem:
    id: str
    audio_path: str
    question: str
    options: tuple[str, ...]
    answer: str
    category: Category | None = None
    difficulty: float = DEFAULT_DIFFICULTY

    def accepted_answers(self) -> tuple[str, ...]:
        """The stored answer plus its letter or option-text counterpart."""
        forms = [self.answer]
        ans = self.answer.strip()
        if len(ans) == 1 and ans.upper() in LETTERS[: len(self.options)]:
            forms.append(self.options[LETTERS.index(ans.upper())])
        for i, opt in enumerate(self.options):
            if answers_match(opt, ans):
                forms.append(LETTERS[i])
        return tuple(forms)


def load_mcq_jsonl(path: str | Path) -> list[MCQItem]:
    path = Path(path)
    items = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
            audio = Path(d["audio_path"])
            if not audio.is_absolute():
                audio = path.parent / audio
            cat = d.get("category")
            items.append(
                MCQItem(
                    id=str(d["id"]),
                    audio_path=str(audio),
                    question=str(d["question"]),
                    options=tuple(map(str, d.get("options", ()))),
                    answer=str(d["answer"]),
                    category=Category(cat) if cat else None,
                    difficulty=float(d.get("difficulty", DEFAULT_DIFFICULTY)),
                )
            )
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}:{lineno}:{exc.colno}: {exc.msg}") from exc
        except KeyError as exc:
            raise DatasetError(f"{path}:{lineno}: missing field {exc.args[0]!r}") from exc
        except ValueError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from exc
    return items


# Keyword featurization of free-text questions into the simulator's context schema.
_CATEGORY_WORDS = {
    Category.SPEECH: r"speak|speaker|said|say|says|voice|talk|conversation|word|spoken|transcri",
    Category.MUSIC: r"music|song|chord|tempo|bpm|melody|instrument|key|pitch|note|harmon|beat|rhythm",
}
_QUERY_WORDS = (
    (1, r"tempo|bpm|beat|rhythm|speed|fast|slow"),
    (2, r"chord|harmon|key|mood|emotion|feel|happy|sad|angry"),
    (0, r"what .*(say|said|sound|word)|pitch|note|frequency|event|instrument|transcri|sound of"),
)


def infer_category(question: str) -> Category:
    q = question.lower()
    for cat, pat in _CATEGORY_WORDS.items():
        if re.search(pat, q):
            return cat
    return Category.SOUND


def infer_query_type(question: str) -> int:
    q = question.lower()
    for qt, pat in _QUERY_WORDS:
        if re.search(pat, q):
            return qt
    return 3


def item_to_task(item: MCQItem) -> TaskInstance:
    cat = item.category or infer_category(item.question)
    qt = infer_query_type(item.question)
    return TaskInstance(
        id=item.id,
        category=cat,
        context=encode_context(cat, qt, item.difficulty),
        required_tools=ToolSet(()),
        answer_key=item.answer,
        audio_path=item.audio_path,
        question_text=item.question,
        query_type=qt,
    )


class Reasoner(Protocol):
    def __call__(self, prompt: str, audio_path: str) -> str: ...


@dataclass
class MockReasoner:
    """Replies from a table keyed by item id or audio path, else a fixed default."""

    replies: Mapping[str, str] = field(default_factory=dict)
    default: str = "<answer>A</answer>"
    prompts: list[str] = field(default_factory=list)

    def __call__(self, prompt: str, audio_path: str, item_id: str | None = None) -> str:
        self.prompts.append(prompt)
        for key in (item_id, audio_path):
            if key is not None and key in self.replies:
                return self.replies[key]
        return self.default


@dataclass(frozen=True)
class CommandReasoner:
    argv: tuple[str, ...]
    timeout_s: float = 60.0

    def __call__(self, prompt: str, audio_path: str, item_id: str | None = None) -> str:
        cmd = [a.replace("{audio}", audio_path) for a in self.argv]
        try:
            proc = subprocess.run(cmd, input=prompt, capture_output=True, text=True, timeout=self.timeout_s)
        except subprocess.TimeoutExpired as exc:
            raise AdapterFailure(f"reasoner timed out after {self.timeout_s} s") from exc
        except OSError as exc:
            raise AdapterFailure(f"cannot run reasoner {cmd[0]}: {exc}") from exc
        if proc.returncode != 0:
            raise AdapterFailure(f"reasoner exited with status {proc.returncode}", proc.stderr)
        return proc.stdout


def reasoner_from_dict(d: Mapping[str, Any]) -> MockReasoner | CommandReasoner:
    if "argv" in d:
        return CommandReasoner(tuple(d["argv"]), float(d.get("timeout_s", 60.0)))
    return MockReasoner(dict(d.get("mock", {})), d.get("default", "<answer>A</answer>"))


@dataclass(frozen=True)
class EpisodeResult:
    item_id: str
    chosen: ToolSet
    prediction: str | None
    correct: bool
    tool_errors: tuple[str, ...] = ()


def collect_tool_outputs(
    chosen: ToolSet, audio_path: str, adapters: Mapping[int, Adapter] | None
) -> tuple[list[str], list[str]]:
    """Serialized outputs in tool-index order; failures are skipped and reported."""
    outputs, errors = [], []
    for t in chosen:
        try:
            outputs.append(dumps(run_tool(t, audio_path, adapters)))
        except (AutagError, AudioError, OSError, ValueError) as exc:
            log.warning("tool %d failed on %s: %s", t, audio_path, exc)
            errors.append(f"{t}: {exc}")
    return outputs, errors


def run_episode(
    item: MCQItem,
    select: Callable[[TaskInstance], ToolSet],
    reasoner: Callable[..., str],
    adapters: Mapping[int, Adapter] | None = None,
) -> EpisodeResult:
    task = item_to_task(item)
    chosen = select(task)
    outputs, errors = collect_tool_outputs(chosen, item.audio_path, adapters)
    prompt = reasoner_prompt(format_question(item.question, item.options), outputs)
    reply = reasoner(prompt, item.audio_path, item_id=item.id)
    try:
        pred = parse_answer_tag(reply)
    except MissingAnswerTag:
        pred = None
    ok = pred is not None and answers_match(pred, *item.accepted_answers())
    return EpisodeResult(item.id, chosen, pred, ok, tuple(errors))


def policy_selector(params: PolicyParams) -> Callable[[TaskInstance], ToolSet]:
    return lambda task: greedy_action(params, task.context_array())


def evaluate_external(
    items: Sequence[MCQItem],
    select: Callable[[TaskInstance], ToolSet],
    reasoner: Callable[..., str],
    adapters: Mapping[int, Adapter] | None = None,
) -> dict[str, Any]:
    results = [run_episode(it, select, reasoner, adapters) for it in items]
    n = len(results)
    return {
        "n": n,
        "accuracy": float(np.mean([r.correct for r in results])) if n else 0.0,
        "avg_tools": float(np.mean([len(r.chosen) for r in results])) if n else 0.0,
        "episodes": [
            {
                "id": r.item_id,
                "chosen": r.chosen.serialize(),
                "prediction": r.prediction,
                "correct": r.correct,
                "tool_errors": list(r.tool_errors),
            }
            for r in results
        ],
    }
