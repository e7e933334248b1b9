import itertools

import pytest
from hypothesis import given, strategies as st

from autagent.core import (
    FEATURE_DIM,
    TOOL_NAMES,
    Category,
    MalformedSelection,
    MissingAnswerTag,
    TaskInstance,
    ToolOutput,
    ToolSet,
    answers_match,
    encode_context,
    feature_schema_hash,
    parse_answer_tag,
    parse_tool_indices,
    selection_or_empty,
)


@pytest.mark.parametrize(
    "text, expected",
    [
        ("<answer>dog</answer>", "dog"),
        ("<answer></answer>", ""),
        ("blah <answer> A#:maj </answer> tail", "A#:maj"),
        ("<answer>first</answer><answer>second</answer>", "first"),
        ("<answer>multi\nline</answer>", "multi\nline"),
    ],
)
def test_parse_answer_tag(text, expected):
    assert parse_answer_tag(text) == expected


@pytest.mark.parametrize("text", ["no tags", "<answer>open only", "<ANSWER>x</ANSWER>", "</answer>x<answer>"])
def test_missing_answer_tag(text):
    with pytest.raises(MissingAnswerTag):
        parse_answer_tag(text)


@given(st.text().filter(lambda s: "<answer>" not in s and "</answer>" not in s))
def test_answer_tag_idempotent_when_rewrapped(body):
    once = parse_answer_tag(f"<answer>{body}</answer>")
    assert parse_answer_tag(f"<answer>{once}</answer>") == once


@pytest.mark.parametrize(
    "text, members",
    [
        ("<answer>0,3</answer>", (0, 3)),
        ("<answer></answer>", ()),
        ("<answer>3, 3, 1</answer>", (1, 3)),
        ("<answer>none</answer>", ()),
        ("<answer> None </answer>", ()),
        ("<answer>5</answer>", (5,)),
    ],
)
def test_parse_tool_indices(text, members):
    assert parse_tool_indices(text, 6).members == members


@pytest.mark.parametrize("body", ["6", "-1", "a", "1,,2", "1.5", "0;1"])
def test_malformed_selection(body):
    with pytest.raises(MalformedSelection):
        parse_tool_indices(f"<answer>{body}</answer>", 6)


def test_lenient_selection_maps_failures_to_empty():
    assert len(selection_or_empty("garbage")) == 0
    assert len(selection_or_empty("<answer>9</answer>")) == 0
    assert selection_or_empty("<answer>2</answer>").members == (2,)


def test_toolset_roundtrip_exhaustive():
    for bits in range(2**6):
        ts = ToolSet.from_bits(bits)
        again = parse_tool_indices(f"<answer>{ts.serialize()}</answer>", 6)
        assert again == ts


def test_toolset_canonical_and_validated():
    assert ToolSet((4, 1, 4)).members == (1, 4)
    assert ToolSet((4, 1)).serialize() == "1,4"
    with pytest.raises(ValueError):
        ToolSet((6,))
    assert ToolSet.full().members == tuple(range(6))
    assert list(ToolSet.from_mask([True, False, True]).mask()) == [True, False, True]


def test_task_instance_invariants():
    ctx = encode_context(Category.MUSIC, 1, 0.25)
    assert len(ctx) == FEATURE_DIM
    t = TaskInstance("t", Category.MUSIC, ctx, ToolSet((3,)))
    assert t.difficulty == 0.25
    with pytest.raises(ValueError):
        TaskInstance("bad", Category.SOUND, (float("nan"),) * FEATURE_DIM, ToolSet())


def test_tool_output_names_are_pinned():
    assert TOOL_NAMES[2] == "chord_recognition" and TOOL_NAMES[3] == "Tempo Estimation"
    ToolOutput(0, "automatic-speech-recognition", "hi")
    with pytest.raises(ValueError):
        ToolOutput(3, "tempo", "120.00")


def test_answer_matching_trims_and_casefolds():
    assert answers_match("  Dog ", "dog")
    assert answers_match("B", "a", "b")
    assert not answers_match("dogs", "dog")


def test_schema_hash_depends_on_k():
    assert feature_schema_hash(6) != feature_schema_hash(7)
    assert len(feature_schema_hash()) == 16


@pytest.mark.parametrize("cat, qt", list(itertools.product(Category, range(4))))
def test_context_one_hot(cat, qt):
    x = encode_context(cat, qt, 0.0)
    assert sum(x[:3]) == 1 and sum(x[3:7]) == 1 and x[cat.index] == 1 and x[3 + qt] == 1
