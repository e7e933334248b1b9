"""Prompt templates for tool selection and for the frozen reasoner."""

from __future__ import annotations

from typing import Sequence

from .core import NUM_TOOLS, TOOL_LABELS

TOOL_DESCRIPTIONS: tuple[tuple[str, str], ...] = (
    (
        "Automatic Speech Recognition Tool",
        "Transcribes spoken content into text. It is capable of performing multilingual speech recognition, "
        "speech translation, and language identification.",
    ),
    (
        "Emotion Recognition Tool",
        "It is strictly designed to classify the speaker's emotional state (e.g., happy, sad, angry, fearful, "
        "neutral) and sentiment from audio signals.",
    ),
    (
        "Chord Recognition Tool",
        "Predict the harmonic structure and chord progression (e.g., C major, A minor, G7) of a musical piece "
        "by analyzing chroma vectors extracted from the audio signal.",
    ),
    (
        "Beat and Tempo Tracking",
        "It estimates the global tempo (BPM) and detects the beat events (time locations of beats) to analyze "
        "the rhythmic structure of the audio.",
    ),
    (
        "Pitch Tracking",
        "Pitch tracking on thresholded parabolically-interpolated STFT. This tool estimates the fundamental "
        "frequency (f0) of the audio over time, useful for analyzing melody, intonation, or tonal characteristics.",
    ),
    (
        "Audio Event Detection Tool",
        "It is designed to classify and tag audio events, ranging from environmental sounds to human non-speech "
        "sounds.",
    ),
)

_SELECTION_HEAD = (
    "You are an expert agent specialized in selecting tools to solve audio reasoning tasks. "
    "You are provided with access to {k} tools, indexed from 0 to {last}. "
    "Each tool is implemented differently. Treat all tools as independent.\n\n"
    "Function:\n"
)

_SELECTION_TAIL = (
    "\nQuery: {question}\n\n"
    "Your job:\n"
    "1. Carefully analyze the Audio content and the Query. Select the index number(s) of the tools "
    "that are most helpful for solving the task.\n"
    "2. You MUST output only the selected tool indices as a comma-separated list, enclosed in "
    "<answer></answer> tags."
)

TOOL_AUGMENTED_TEMPLATE = (
    "Question: {question}\n\n"
    "Extra information from the audio analysis:\n\n"
    "{tool_info}\n\n"
    "Answer the question based on the audio and extra information. \n"
    "You MUST output your final answer ONLY within <answer></answer> tags. Be concise. "
    "Example:<answer>dog</answer>."
)

BASELINE_TEMPLATE = (
    "Question: {question}\n\n"
    "Answer the question based on the audio and extra information. "
    "You MUST output your final answer ONLY within <answer></answer> tags."
)


def selection_prompt(question: str, with_descriptions: bool = True, k: int = NUM_TOOLS) -> str:
    """Tool-selection prompt; without descriptions, tools are listed by name only."""
    lines = []
    for i in range(k):
        if with_descriptions and i < len(TOOL_DESCRIPTIONS):
            name, desc = TOOL_DESCRIPTIONS[i]
            lines.append(f"{i}: {name}\n   - Description: {desc}")
        else:
            label = TOOL_LABELS[i] if i < len(TOOL_LABELS) else f"Tool {i}"
            lines.append(f"{i}: {label}")
    return _SELECTION_HEAD.format(k=k, last=k - 1) + "\n".join(lines) + "\n" + _SELECTION_TAIL.format(question=question)


def format_question(question: str, options: Sequence[str] = ()) -> str:
    if not options:
        return question
    letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    return question + "\n" + "\n".join(f"({letters[i]}) {opt}" for i, opt in enumerate(options))


def reasoner_prompt(question: str, tool_outputs: Sequence[str] = ()) -> str:
    """Baseline prompt when no tool ran, otherwise the tool-augmented one."""
    if not tool_outputs:
        return BASELINE_TEMPLATE.format(question=question)
    return TOOL_AUGMENTED_TEMPLATE.format(question=question, tool_info="\n".join(tool_outputs))
