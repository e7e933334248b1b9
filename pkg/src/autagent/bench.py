"""Evaluation harness: baseline strategies, transfer, invocation histograms, reward ablation.

Every strategy is judged against the same per-task uniform, so differences
between rows come from tool choice alone.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import CATEGORIES, TaskInstance, ToolSet
from .policy import CheckpointMismatch, PolicyParams, greedy_action, sample_action
from .simenv import (
    EmptyTaskSet,
    ReasonerProfile,
    SimEnvironment,
    correct_prob,
    judge,
    oracle_correct,
    task_noise,
)
from .trainer import RewardMode, TrainConfig, train

RANDOM_STREAM = 3
SAMPLED_STREAM = 4


@dataclass(frozen=True)
class Strategy:
    kind: str
    tool: int | None = None
    params: PolicyParams | None = field(default=None, compare=False)
    sampled: bool = False

    KINDS = ("NoTool", "AllTools", "Random", "SingleTool", "Heuristic", "Trained", "Oracle")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}")
        if self.kind == "SingleTool" and self.tool is None:
            raise ValueError("SingleTool needs a tool index")
        if self.kind == "Trained" and self.params is None:
            raise ValueError("Trained needs policy params")

    @property
    def name(self) -> str:
        return f"SingleTool({self.tool})" if self.kind == "SingleTool" else self.kind

    @classmethod
    def no_tool(cls) -> "Strategy":
        return cls("NoTool")

    @classmethod
    def all_tools(cls) -> "Strategy":
        return cls("AllTools")

    @classmethod
    def random(cls) -> "Strategy":
        return cls("Random")

    @classmethod
    def single(cls, k: int) -> "Strategy":
        return cls("SingleTool", tool=k)

    @classmethod
    def heuristic(cls) -> "Strategy":
        return cls("Heuristic")

    @classmethod
    def trained(cls, params: PolicyParams, sampled: bool = False) -> "Strategy":
        return cls("Trained", params=params, sampled=sampled)

    @classmethod
    def oracle(cls) -> "Strategy":
        return cls("Oracle")


@dataclass(frozen=True)
class StrategyResult:
    strategy: str
    accuracy: float
    category_accuracy: Mapping[str, float]
    category_counts: Mapping[str, int]
    avg_tools: float
    tool_freq: tuple[int, ...]
    correct: tuple[bool, ...] = field(repr=False, default=())

    @property
    def eval_size(self) -> int:
        return sum(self.category_counts.values())


@dataclass(frozen=True)
class BenchReport:
    rows: tuple[StrategyResult, ...]
    eval_size: int
    seed: int
    env_name: str
    profile_name: str

    def row(self, name: str) -> StrategyResult:
        for r in self.rows:
            if r.strategy == name:
                return r
        raise KeyError(name)

    def names(self) -> list[str]:
        return [r.strategy for r in self.rows]

    @property
    def stem(self) -> str:
        return f"report_{self.env_name}_{self.profile_name}_{self.seed}"


def chosen_sets(
    strategy: Strategy,
    env: SimEnvironment,
    tasks: Sequence[TaskInstance],
    seed: int,
) -> list[ToolSet]:
    """Tool set each task receives under a strategy (Oracle reports its best single tool)."""
    k = env.k
    if strategy.kind == "NoTool":
        return [ToolSet((), k)] * len(tasks)
    if strategy.kind == "AllTools":
        return [ToolSet.full(k)] * len(tasks)
    if strategy.kind == "SingleTool":
        if not 0 <= strategy.tool < k:
            raise ValueError(f"SingleTool index {strategy.tool} outside [0, {k})")
        return [ToolSet((strategy.tool,), k)] * len(tasks)
    if strategy.kind == "Random":
        out = []
        for i in range(len(tasks)):
            bits = int(np.random.default_rng([seed, RANDOM_STREAM, i]).integers(0, 2**k))
            out.append(ToolSet.from_bits(bits, k))
        return out
    if strategy.kind == "Heuristic":
        hmap = env.config.heuristic_map
        return [hmap.get(t.category, ToolSet((), k)) for t in tasks]
    if strategy.kind == "Trained":
        params = strategy.params
        if params.k != k or params.d != env.spec.d:
            raise CheckpointMismatch(f"policy is K={params.k}, D={params.d}; env is K={k}, D={env.spec.d}")
        if strategy.sampled:
            return [
                sample_action(params, t.context, np.random.default_rng([seed, SAMPLED_STREAM, i])).action
                for i, t in enumerate(tasks)
            ]
        return [greedy_action(params, t.context) for t in tasks]
    if strategy.kind == "Oracle":
        return [
            ToolSet((int(np.argmax([correct_prob(env.profile, t, ToolSet((j,), k)) for j in range(k)])),), k)
            for t in tasks
        ]
    raise AssertionError(strategy.kind)


def invocation_counts(sets: Iterable[ToolSet], k: int) -> tuple[int, ...]:
    """No-tool count first, then per-tool inclusion counts."""
    freq = [0] * (k + 1)
    for s in sets:
        if len(s) == 0:
            freq[0] += 1
        for t in s:
            freq[t + 1] += 1
    return tuple(freq)


def run_strategy(
    strategy: Strategy,
    env: SimEnvironment,
    tasks: Sequence[TaskInstance],
    seed: int,
    noise: Sequence[float] | None = None,
) -> StrategyResult:
    if not tasks:
        raise EmptyTaskSet("no tasks to evaluate")
    if noise is None:
        noise = task_noise(seed, len(tasks))
    sets = chosen_sets(strategy, env, tasks, seed)
    profile = env.profile
    if strategy.kind == "Oracle":
        correct = [oracle_correct(profile, t, float(u))[0] for t, u in zip(tasks, noise, strict=True)]
    else:
        correct = [
            judge(profile, t, s, u=float(u)).tool_correct for t, s, u in zip(tasks, sets, noise, strict=True)
        ]
    hits = {c.value: 0 for c in CATEGORIES}
    counts = {c.value: 0 for c in CATEGORIES}
    for t, ok in zip(tasks, correct):
        counts[t.category.value] += 1
        hits[t.category.value] += int(ok)
    cat_acc = {c: (hits[c] / counts[c] if counts[c] else 0.0) for c in counts}
    freq = invocation_counts(sets, env.k)
    return StrategyResult(
        strategy=strategy.name,
        accuracy=sum(correct) / len(tasks),
        category_accuracy=cat_acc,
        category_counts=counts,
        avg_tools=sum(freq[1:]) / len(tasks),
        tool_freq=freq,
        correct=tuple(correct),
    )


def invocation_histogram(
    strategy: Strategy, env: SimEnvironment, tasks: Sequence[TaskInstance], seed: int
) -> tuple[int, ...]:
    return invocation_counts(chosen_sets(strategy, env, tasks, seed), env.k)


def default_strategies(k: int, params: PolicyParams | None = None) -> list[Strategy]:
    out = [Strategy.no_tool(), Strategy.random(), Strategy.all_tools(), Strategy.heuristic()]
    if params is not None:
        out.append(Strategy.trained(params))
    out += [Strategy.single(j) for j in range(k)]
    out.append(Strategy.oracle())
    return out


def filter_strategies(strategies: Sequence[Strategy], names: Iterable[str]) -> list[Strategy]:
    wanted = [n.strip() for n in names if n.strip()]
    known = {s.name for s in strategies} | {s.kind for s in strategies}
    missing = [n for n in wanted if n not in known]
    if missing:
        raise ValueError(f"unknown or unavailable strategies: {', '.join(missing)}")
    return [s for s in strategies if s.name in wanted or s.kind in wanted]


def run_bench(
    env: SimEnvironment,
    seed: int,
    strategies: Sequence[Strategy],
    eval_size: int | None = None,
) -> BenchReport:
    tasks = env.eval_tasks(seed, eval_size)
    noise = task_noise(seed, len(tasks))
    rows = tuple(run_strategy(s, env, tasks, seed, noise) for s in strategies)
    return BenchReport(rows, len(tasks), seed, env.spec.name, env.profile.name)


# -- transfer and ablation -------------------------------------------------------


@dataclass(frozen=True)
class TransferResult:
    profile: str
    no_tool: float
    plugin: float
    self_: float

    @property
    def gap(self) -> float:
        return self.self_ - self.plugin


def transfer_eval(
    params_a: PolicyParams,
    params_b: PolicyParams,
    env_b: SimEnvironment,
    seed: int,
    eval_size: int | None = None,
) -> TransferResult:
    """B's No-Tool accuracy, A's policy on B ("Plugin") and B's own policy on B ("Self")."""
    for p in (params_a, params_b):
        if p.k != env_b.k:
            raise CheckpointMismatch(f"policy has K={p.k}, reasoner env has K={env_b.k}")
    tasks = env_b.eval_tasks(seed, eval_size)
    noise = task_noise(seed, len(tasks))
    acc = lambda s: run_strategy(s, env_b, tasks, seed, noise).accuracy  # noqa: E731
    return TransferResult(
        profile=env_b.profile.name,
        no_tool=acc(Strategy.no_tool()),
        plugin=acc(Strategy.trained(params_a)),
        self_=acc(Strategy.trained(params_b)),
    )


def train_and_transfer(
    cfg: TrainConfig,
    env_a: SimEnvironment,
    profile_b: ReasonerProfile,
    eval_size: int | None = None,
) -> tuple[TransferResult, PolicyParams, PolicyParams]:
    env_b = env_a.with_profile(profile_b)
    params_a, _ = train(cfg, env_a)
    params_b, _ = train(cfg, env_b)
    return transfer_eval(params_a, params_b, env_b, cfg.seed, eval_size), params_a, params_b


@dataclass(frozen=True)
class AblationRow:
    mode: str
    accuracy: float
    avg_tools: float
    final_mean_reward: float


@dataclass(frozen=True)
class AblationResult:
    no_tool: AblationRow
    differential: AblationRow
    binary: AblationRow
    params: Mapping[str, PolicyParams] = field(repr=False, default_factory=dict)

    @property
    def rows(self) -> tuple[AblationRow, ...]:
        return (self.no_tool, self.binary, self.differential)


def ablation(cfg: TrainConfig, env: SimEnvironment, seed: int | None = None, eval_size: int | None = None) -> AblationResult:
    """Train once per reward mode on identical env and seed, then evaluate greedily."""
    seed = cfg.seed if seed is None else seed
    tasks = env.eval_tasks(seed, eval_size)
    noise = task_noise(seed, len(tasks))
    base = run_strategy(Strategy.no_tool(), env, tasks, seed, noise)
    out: dict[str, AblationRow] = {}
    params_by_mode: dict[str, PolicyParams] = {}
    for mode in (RewardMode.DIFFERENTIAL, RewardMode.BINARY):
        mode_cfg = TrainConfig(**{**cfg.__dict__, "reward_mode": mode, "seed": seed})
        params, log = train(mode_cfg, env)
        res = run_strategy(Strategy.trained(params), env, tasks, seed, noise)
        out[mode.value] = AblationRow(mode.value, res.accuracy, res.avg_tools, log[-1]["mean_reward"] if log else 0.0)
        params_by_mode[mode.value] = params
    return AblationResult(
        no_tool=AblationRow("NoTool", base.accuracy, 0.0, 0.0),
        differential=out["Differential"],
        binary=out["Binary"],
        params=params_by_mode,
    )


# -- rendering ---------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def report_columns(k: int) -> list[str]:
    cats = [c.value for c in CATEGORIES]
    return (
        ["strategy", "accuracy"]
        + [f"acc_{c}" for c in cats]
        + [f"n_{c}" for c in cats]
        + ["avg_tools", "freq_none"]
        + [f"freq_T{j + 1}" for j in range(k)]
    )


def _report_records(report: BenchReport) -> list[list[str]]:
    recs = []
    for r in report.rows:
        recs.append(
            [r.strategy, _fmt(r.accuracy)]
            + [_fmt(r.category_accuracy[c.value]) for c in CATEGORIES]
            + [str(r.category_counts[c.value]) for c in CATEGORIES]
            + [_fmt(r.avg_tools)]
            + [str(f) for f in r.tool_freq]
        )
    return recs


def to_csv(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def markdown_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]

    def line(cells):
        return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"

    out = [line(header), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
    out += [line(r) for r in rows]
    return "\n".join(out) + "\n"


def report_csv(report: BenchReport) -> str:
    k = len(report.rows[0].tool_freq) - 1 if report.rows else 0
    return to_csv(report_columns(k), _report_records(report))


def report_markdown(report: BenchReport) -> str:
    k = len(report.rows[0].tool_freq) - 1 if report.rows else 0
    head = (
        f"# Benchmark: env `{report.env_name}`, reasoner `{report.profile_name}`, "
        f"seed {report.seed}, {report.eval_size} tasks\n\n"
    )
    se = math.sqrt(0.25 / report.eval_size) if report.eval_size else float("nan")
    foot = f"\nBinomial standard error at p=0.5: {se:.4f}\n"
    return head + markdown_table(report_columns(k), _report_records(report)) + foot


def histogram_csv(hists: Mapping[str, Sequence[int]]) -> str:
    k = len(next(iter(hists.values()))) - 1
    header = ["strategy", "none"] + [f"T{j + 1}" for j in range(k)]
    return to_csv(header, [[name] + [str(c) for c in h] for name, h in hists.items()])


def ablation_records(res: AblationResult) -> tuple[list[str], list[list[str]]]:
    header = ["method", "accuracy", "avg_tools"]
    return header, [[r.mode, _fmt(r.accuracy), _fmt(r.avg_tools)] for r in res.rows]


def transfer_records(res: TransferResult) -> tuple[list[str], list[list[str]]]:
    header = ["method", "accuracy"]
    rows = [["NoTool", _fmt(res.no_tool)], ["Self", _fmt(res.self_)], ["Plugin", _fmt(res.plugin)]]
    return header, rows


def safe_name(s: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", s)
