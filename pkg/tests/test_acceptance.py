"""The ten acceptance criteria, each at its stated tolerance.

Every test records a PASS/FAIL line through ``conftest.ACCEPTANCE_RESULTS``;
the lines are printed in the terminal summary after the run.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

import conftest
from autagent import cli
from autagent.audiodsp import synth
from autagent.audiodsp.chords import LABELS
from autagent.audiodsp.schema import dumps, parse_tool_json, validate_tool_json
from autagent.audiodsp.tools import analyze
from autagent.core import ToolSet, Verdict
from autagent.policy import PolicyParams, action_logprob, all_actions, grad_logprob, sample_action
from autagent.bench import Strategy, ablation, default_strategies, run_bench, train_and_transfer
from autagent.trainer import (
    GroupRollout,
    TrainConfig,
    binary_reward,
    differential_reward,
    group_advantages,
    grpo_step,
)

K, D = 6, 8
SEED = 7


def report(n, ok, detail):
    conftest.ACCEPTANCE_RESULTS.append((n, bool(ok), detail))
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _rand_params(rng, scale=0.7):
    return PolicyParams(rng.normal(0, scale, (K, D)), rng.normal(0, scale, K))


@pytest.fixture(scope="module")
def default_report(open_env, trained_open):
    params, _ = trained_open
    return run_bench(open_env, SEED, default_strategies(open_env.k, params), 2000)


def test_criterion_01_reward_semantics():
    t0 = time.perf_counter()
    diff = {(True, False): 1, (True, True): 0, (False, False): 0, (False, True): -1}
    bad = []
    for (tool, base), want in diff.items():
        v = Verdict(base_correct=base, tool_correct=tool)
        if differential_reward(v) != want:
            bad.append(f"diff{(tool, base)}")
        if binary_reward(v) != int(tool):
            bad.append(f"bin{(tool, base)}")
    ms = (time.perf_counter() - t0) * 1000
    report(1, not bad, f"4 verdicts x 2 modes, {ms:.2f} ms" + (f", mismatches {bad}" if bad else ""))


def test_criterion_02_advantage_normalization():
    rng = np.random.default_rng(0)
    worst_mean = worst_std = 0.0
    done = 0
    while done < 1000:
        g = int(rng.integers(2, 17))
        r = rng.choice([-1.0, 0.0, 1.0], g) if done % 2 else rng.normal(0, 3, g)
        if np.std(r) == 0:
            continue
        a = group_advantages(r)
        worst_mean = max(worst_mean, abs(float(np.mean(a))))
        worst_std = max(worst_std, abs(float(np.std(a)) - 1.0))
        done += 1
    degenerate = all(np.all(group_advantages([c] * g) == 0) for c in (-1, 0, 1, 0.25) for g in (2, 6, 16))
    ok = worst_mean < 1e-9 and worst_std < 1e-9 and degenerate
    report(2, ok, f"max |mean| {worst_mean:.1e}, max |std-1| {worst_std:.1e}, degenerate zeros {degenerate}")


def _rollouts(params, rng, n_tasks=4, g=6):
    out = []
    for t in range(n_tasks):
        x = rng.normal(size=D)
        samples = tuple(sample_action(params, x, rng) for _ in range(g))
        rewards = tuple(float(v) for v in rng.integers(-1, 2, g))
        out.append(GroupRollout(f"t{t}", tuple(x), samples, rewards, tuple(map(float, group_advantages(rewards))), False))
    return out


def test_criterion_03_gradients():
    rng = np.random.default_rng(3)
    h = 1e-5
    worst = 0.0
    for _ in range(100):
        params = _rand_params(rng)
        x = rng.normal(size=D)
        a = ToolSet.from_mask(rng.random(K) < 0.5)
        g = grad_logprob(params, x, a)
        flat = np.concatenate([params.weights.ravel(), params.biases])
        fd = np.empty_like(flat)
        for i in range(flat.size):
            up, dn = flat.copy(), flat.copy()
            up[i] += h
            dn[i] -= h
            f = lambda v: action_logprob(PolicyParams(v[: K * D].reshape(K, D), v[K * D:]), x, a).total_logprob  # noqa: E731
            fd[i] = (f(up) - f(dn)) / (2 * h)
        an = np.concatenate([g.weights.ravel(), g.biases])
        worst = max(worst, float(np.linalg.norm(an - fd) / max(np.linalg.norm(fd), 1e-12)))

    # clipped branch: ratio 1+2eps with positive advantage gives a zero update
    eps = 0.2
    x1 = np.zeros(D)
    x1[0] = 1.0
    old = PolicyParams.zeros(k=1, d=D)
    p_new = 0.5 * (1 + 2 * eps)
    moved = PolicyParams(np.zeros((1, D)), np.array([math.log(p_new / (1 - p_new))]))
    s = action_logprob(old, x1, ToolSet((0,), 1))
    ro = GroupRollout("t", tuple(x1), (s,), (1.0,), (1.0,), False)
    stepped, stats = grpo_step(moved, old, old, [ro], TrainConfig(clip_eps=eps, kl_beta=0.0, learning_rate=1.0))
    clipped_ok = np.array_equal(stepped.weights, moved.weights) and np.array_equal(stepped.biases, moved.biases)

    # beta=0 and unclipped: the step is lr times the mean over tokens of A * grad log pi
    pg_err = 0.0
    for _ in range(5):
        params = _rand_params(rng, 0.5)
        ros = _rollouts(params, rng)
        cfg = TrainConfig(kl_beta=0.0, learning_rate=0.3)
        new, _ = grpo_step(params, params, params, ros, cfg)
        ew, eb, n = np.zeros((K, D)), np.zeros(K), 0
        for r in ros:
            for smp, adv in zip(r.samples, r.advantages):
                gl = grad_logprob(params, r.context, smp.action)
                ew += adv * gl.weights
                eb += adv * gl.biases
                n += 1
        scale = cfg.learning_rate / (n * K)
        pg_err = max(pg_err, float(np.max(np.abs(new.weights - params.weights - scale * ew))), float(np.max(np.abs(new.biases - params.biases - scale * eb))))
    ok = worst < 1e-4 and clipped_ok and pg_err < 1e-9
    report(3, ok, f"max FD rel err {worst:.1e} over 100 triples, clipped step zero {clipped_ok}, PG reduction err {pg_err:.1e}")


def test_criterion_04_probability_law():
    rng = np.random.default_rng(4)
    acts = all_actions(K)
    assert len(acts) == 64
    worst = 0.0
    for _ in range(100):
        params = PolicyParams(rng.normal(0, 2, (K, D)), rng.normal(0, 2, K), float(rng.uniform(0.3, 3)))
        x = rng.normal(size=D)
        total = math.fsum(math.exp(action_logprob(params, x, a).total_logprob) for a in acts)
        worst = max(worst, abs(total - 1.0))
    report(4, worst < 1e-9, f"max |sum - 1| {worst:.1e} over 100 draws")


def test_criterion_05_phenomena(default_report):
    r = default_report
    no, allt, orc = (r.row(n).accuracy for n in ("NoTool", "AllTools", "Oracle"))
    singles = {n: r.row(n).accuracy for n in r.names() if n.startswith("SingleTool")}
    overload = no - allt
    gap = orc - no
    ok = overload >= 0.03 and gap >= 0.10 and all(orc >= v for v in singles.values())
    report(5, ok, f"NoTool {no:.4f}, AllTools {allt:.4f} (-{overload:.4f}), Oracle {orc:.4f} (+{gap:.4f}), best single {max(singles.values()):.4f}")


def test_criterion_06_training_efficacy(default_report):
    r = default_report
    tr, no, heu = (r.row(n).accuracy for n in ("Trained", "NoTool", "Heuristic"))
    ok = tr >= no + 0.05 and tr >= heu
    report(6, ok, f"Trained {tr:.4f}, NoTool {no:.4f}, Heuristic {heu:.4f}")


def test_criterion_07_ablation_ordering(open_env):
    res = ablation(TrainConfig(), open_env, SEED, 2000)
    d, b = res.differential, res.binary
    ok = d.avg_tools < b.avg_tools and d.accuracy >= b.accuracy
    report(
        7,
        ok,
        f"Differential avg_tools {d.avg_tools:.4f} acc {d.accuracy:.4f}; Binary avg_tools {b.avg_tools:.4f} acc {b.accuracy:.4f}",
    )


def test_criterion_08_transfer(open_env, env_config):
    res, _, _ = train_and_transfer(TrainConfig(), open_env, env_config.profile("closed"), 2000)
    ok = res.plugin > res.no_tool and res.self_ - res.plugin <= 0.02
    report(8, ok, f"profile {res.profile}: NoTool {res.no_tool:.4f}, Plugin {res.plugin:.4f}, Self {res.self_:.4f}")


def test_criterion_09_dsp_oracles():
    problems = []
    docs = []

    def check_doc(tid, audio):
        out = analyze(tid, audio)
        text = dumps(out)
        validate_tool_json(json.loads(text), tid)
        if dumps(parse_tool_json(text, tid)) != text:
            problems.append(f"layout not canonical for tool {tid}")
        docs.append(text)
        return out.payload

    for bpm in (60, 90, 120, 150, 180):
        got = float(check_doc(3, synth.click_track(bpm)))
        if abs(got - bpm) > 2:
            problems.append(f"tempo {bpm}->{got}")
    for f0 in (110, 220, 440, 880):
        pts = check_doc(4, synth.tone(f0, 3.0))
        bad = [p for p in pts if abs(float(p["fundamental frequency"].split()[0]) - f0) > 0.01 * f0]
        if not pts or bad:
            problems.append(f"pitch {f0}: {bad or 'no frames'}")
    wrong_chords = 0
    for label in LABELS:
        root, quality = label.split(":")
        segs = check_doc(2, synth.triad(root, quality))
        if {s["value"] for s in segs} != {label}:
            wrong_chords += 1
            problems.append(f"chord {label}->{[s['value'] for s in segs]}")
    check_doc(5, synth.noise())
    report(9, not problems, f"5 tempi, 4 pitches, 24 triads ({24 - wrong_chords} correct), {len(docs)} JSON docs valid" + (f"; {problems}" if problems else ""))


def _cli_round(tmp, capsys):
    out = tmp
    base = ["--output-dir", str(out), "--eval-size", "2000"]
    for argv in (["train", *base], ["bench", *base], ["ablate", *base], ["transfer", *base]):
        assert cli.main(argv) == 0, argv
    capsys.readouterr()
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if not p.name.startswith(".")}


def test_criterion_10_determinism(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("AUTAG_SEED", raising=False)
    a = _cli_round(tmp_path / "a", capsys)
    b = _cli_round(tmp_path / "b", capsys)
    differ = [n for n in a if a[n] != b.get(n)]
    ok = set(a) == set(b) and not differ and len(a) >= 10
    report(10, ok, f"{len(a)} report/checkpoint files compared byte-for-byte" + (f", differing {differ}" if differ else ""))
