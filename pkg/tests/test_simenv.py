import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from autagent.core import Category, TaskInstance, ToolSet, encode_context
from autagent.simenv import (
    CATEGORIES,
    EmptyTaskSet,
    EnvConfigError,
    EnvSpec,
    QueryKind,
    ReasonerProfile,
    correct_prob,
    judge,
    load_env,
    logistic,
    oracle_accuracy,
    sample_task,
    sample_tasks,
    task_noise,
)

PROFILE = ReasonerProfile("p", (1.0, 0.5, 0.0), 1.0, (2.0,) * 6, (1.0,) * 6)


def task(cat=Category.SOUND, difficulty=0.0, required=(3,), qt=0):
    return TaskInstance("t", cat, encode_context(cat, qt, difficulty), ToolSet(required))


def test_correct_prob_examples():
    zero = ReasonerProfile("z", (0.0, 0.0, 0.0), 1.0, (0.0,) * 6, (0.0,) * 6)
    assert correct_prob(zero, task(), ToolSet()) == 0.5
    assert correct_prob(PROFILE, task(), ToolSet()) == pytest.approx(0.731059, abs=1e-6)
    all_tools = correct_prob(PROFILE, task(), ToolSet.full())
    assert all_tools == pytest.approx(logistic(1.0 + 2 - 5))
    assert all_tools < correct_prob(PROFILE, task(), ToolSet())


def test_judge_deterministic_threshold():
    prof = ReasonerProfile("d", (np.log(0.4 / 0.6), 0, 0), 0.0, (np.log(0.7 / 0.3) - np.log(0.4 / 0.6),) + (0.0,) * 5, (0.0,) * 6, True)
    v = judge(prof, task(required=(0,)), ToolSet((0,)), u=0.99)
    assert (v.base_correct, v.tool_correct) == (False, True)


def test_empty_choice_matches_baseline():
    rng = np.random.default_rng(0)
    for _ in range(200):
        v = judge(PROFILE, task(difficulty=rng.uniform()), ToolSet(), rng)
        assert v.base_correct == v.tool_correct


@settings(max_examples=200)
@given(
    bits_a=st.integers(0, 63),
    bits_b=st.integers(0, 63),
    req=st.integers(0, 63),
    u=st.floats(0, 1, exclude_max=True),
    diff=st.floats(0, 1),
)
def test_coupled_noise_dominance(bits_a, bits_b, req, u, diff):
    t = task(difficulty=diff, required=ToolSet.from_bits(req).members)
    a, b = ToolSet.from_bits(bits_a), ToolSet.from_bits(bits_b)
    r = set(t.required_tools)
    if set(b) & r <= set(a) & r and set(a) - r <= set(b) - r:
        assert judge(PROFILE, t, a, u=u).tool_correct >= judge(PROFILE, t, b, u=u).tool_correct


@given(st.integers(0, 63), st.integers(0, 5), st.integers(0, 63))
def test_monotone_gain(bits, extra, req):
    t = task(required=ToolSet.from_bits(req).members)
    base = ToolSet.from_bits(bits)
    more = ToolSet(base.members + (extra,))
    p0, p1 = correct_prob(PROFILE, t, base), correct_prob(PROFILE, t, more)
    if extra in t.required_tools:
        assert p1 >= p0
    else:
        assert p1 <= p0


def test_coupled_dominance_many_draws():
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        t = task(difficulty=rng.uniform(), required=(int(rng.integers(6)),))
        u = float(rng.random())
        helper = judge(PROFILE, t, t.required_tools, u=u)
        assert helper.tool_correct >= helper.base_correct


def test_sample_task_determinism_and_degenerate_mix(env_config):
    spec = env_config.spec
    a = sample_tasks(spec, 50, 3, 0, "x")
    b = sample_tasks(spec, 50, 3, 0, "x")
    assert a == b
    only_sound = EnvSpec(
        category_mix=(1.0, 0.0, 0.0),
        required_set_distribution={Category.SOUND: (QueryKind(0, ToolSet((5,)), 1.0),)},
    )
    rng = np.random.default_rng(0)
    assert all(sample_task(only_sound, rng).category is Category.SOUND for _ in range(100))


def test_category_frequencies_within_three_sigma(env_config):
    spec = env_config.spec
    n = 10_000
    tasks = sample_tasks(spec, n, 11, 0, "c")
    for cat, p in zip(CATEGORIES, spec.category_mix):
        freq = sum(t.category is cat for t in tasks) / n
        assert abs(freq - p) <= 3 * np.sqrt(p * (1 - p) / n)


def test_oracle_properties(open_env):
    tasks = open_env.eval_tasks(7, 500)
    noise = task_noise(7, 500)
    with pytest.raises(EmptyTaskSet):
        oracle_accuracy(open_env.profile, [], [])
    flat = ReasonerProfile("flat", open_env.profile.base_logit_by_category, 1.0, (0.0,) * 6, (0.0,) * 6)
    base = np.mean([judge(flat, t, ToolSet(), u=u).base_correct for t, u in zip(tasks, noise)])
    assert oracle_accuracy(flat, tasks, noise) == pytest.approx(base)


def test_shipped_calibration(open_env):
    tasks = open_env.eval_tasks(7)
    noise = task_noise(7, len(tasks))
    prof = open_env.profile
    none = np.mean([judge(prof, t, ToolSet(), u=u).tool_correct for t, u in zip(tasks, noise)])
    allt = np.mean([judge(prof, t, ToolSet.full(), u=u).tool_correct for t, u in zip(tasks, noise)])
    assert 0.45 <= none <= 0.55
    assert allt < none
    assert oracle_accuracy(prof, tasks, noise) - none >= 0.10


def test_env_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"spec": {\n  "K": 6,,\n}}')
    with pytest.raises(EnvConfigError, match=r"bad.json:2:"):
        load_env(bad)
    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps({"spec": {"category_mix": [1, 0, 0]}}))
    with pytest.raises(EnvConfigError, match="field"):
        load_env(missing)
    with pytest.raises(EnvConfigError):
        EnvSpec(category_mix=(0.5, 0.6, -0.1))
    with pytest.raises(EnvConfigError):
        ReasonerProfile("neg", (0, 0, 0), 1.0, (-1.0,) * 6, (0.0,) * 6)


def test_profiles_shipped(env_config):
    assert set(env_config.profiles) >= {"open", "closed"}
    o, c = env_config.profile("open"), env_config.profile("closed")
    assert all(b > a for a, b in zip(o.base_logit_by_category, c.base_logit_by_category))
    with pytest.raises(EnvConfigError):
        env_config.profile("nope")
