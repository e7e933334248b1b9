"""Simulated frozen reasoner and synthetic task generator.

Tool utility is an additive logit model: each required tool that is chosen
adds its gain, each chosen tool outside the required set subtracts its
distraction penalty. Correctness is decided against one uniform draw per task
(common random numbers), shared by the baseline and every tool-augmented run,
so comparisons between tool sets only ever differ by the tools themselves.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .core import (
    CATEGORIES,
    FEATURE_DIM,
    NUM_QUERY_TYPES,
    NUM_TOOLS,
    AutagError,
    Category,
    TaskInstance,
    ToolSet,
    Verdict,
    encode_context,
)

TRAIN_STREAM = 0
EVAL_STREAM = 1
NOISE_STREAM = 2


class EmptyTaskSet(AutagError, ValueError):
    pass


class EnvConfigError(AutagError, ValueError):
    pass


def logistic(x: float) -> float:
    return 0.5 * (1.0 + math.tanh(0.5 * x))


@dataclass(frozen=True)
class ReasonerProfile:
    name: str
    base_logit_by_category: tuple[float, float, float]
    difficulty_weight: float
    tool_gain: tuple[float, ...]
    distraction_penalty: tuple[float, ...]
    deterministic: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "base_logit_by_category", tuple(map(float, self.base_logit_by_category)))
        object.__setattr__(self, "tool_gain", tuple(map(float, self.tool_gain)))
        object.__setattr__(self, "distraction_penalty", tuple(map(float, self.distraction_penalty)))
        if len(self.base_logit_by_category) != len(CATEGORIES):
            raise EnvConfigError(f"profile {self.name}: need {len(CATEGORIES)} base logits")
        if len(self.tool_gain) != len(self.distraction_penalty):
            raise EnvConfigError(f"profile {self.name}: gain/penalty length mismatch")
        if min(self.tool_gain) < 0 or min(self.distraction_penalty) < 0:
            raise EnvConfigError(f"profile {self.name}: gains and penalties must be >= 0")

    @property
    def k(self) -> int:
        return len(self.tool_gain)

    @classmethod
    def from_dict(cls, name: str, d: Mapping[str, Any]) -> "ReasonerProfile":
        try:
            return cls(
                name=d.get("name", name),
                base_logit_by_category=tuple(d["base_logit_by_category"]),
                difficulty_weight=float(d["difficulty_weight"]),
                tool_gain=tuple(d["tool_gain"]),
                distraction_penalty=tuple(d["distraction_penalty"]),
                deterministic=bool(d.get("deterministic", False)),
            )
        except KeyError as exc:
            raise EnvConfigError(f"profile {name}: missing field {exc.args[0]!r}") from exc


@dataclass(frozen=True)
class QueryKind:
    """One entry of a category's required-set distribution."""

    query_type: int
    tools: ToolSet
    prob: float


@dataclass(frozen=True)
class EnvSpec:
    k: int = NUM_TOOLS
    d: int = FEATURE_DIM
    category_mix: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    required_set_distribution: Mapping[Category, tuple[QueryKind, ...]] = field(default_factory=dict)
    difficulty_range: tuple[float, float] = (0.0, 1.0)
    eval_size: int = 2000
    train_size: int = 2000
    seed: int = 7
    name: str = "custom"

    def __post_init__(self) -> None:
        mix = tuple(float(p) for p in self.category_mix)
        object.__setattr__(self, "category_mix", mix)
        if len(mix) != len(CATEGORIES) or min(mix) < 0 or abs(sum(mix) - 1.0) > 1e-9:
            raise EnvConfigError(f"category_mix must be {len(CATEGORIES)} probabilities summing to 1")
        lo, hi = self.difficulty_range
        if lo > hi:
            raise EnvConfigError("difficulty_range lo > hi")
        if self.d != FEATURE_DIM:
            raise EnvConfigError(f"feature dimension is fixed at {FEATURE_DIM}")
        for cat, kinds in self.required_set_distribution.items():
            total = sum(q.prob for q in kinds)
            if abs(total - 1.0) > 1e-9:
                raise EnvConfigError(f"required-set probabilities for {cat.value} sum to {total}")
            for q in kinds:
                if q.tools.k != self.k or not 0 <= q.query_type < NUM_QUERY_TYPES:
                    raise EnvConfigError(f"bad query kind {q} for {cat.value}")
        for cat, p in zip(CATEGORIES, mix):
            if p > 0 and cat not in self.required_set_distribution:
                raise EnvConfigError(f"no required-set distribution for {cat.value}")


def sample_task(spec: EnvSpec, rng: np.random.Generator, task_id: str = "t0") -> TaskInstance:
    cat = CATEGORIES[int(rng.choice(len(CATEGORIES), p=spec.category_mix))]
    kinds = spec.required_set_distribution[cat]
    kind = kinds[int(rng.choice(len(kinds), p=[q.prob for q in kinds]))]
    lo, hi = spec.difficulty_range
    difficulty = float(rng.uniform(lo, hi))
    return TaskInstance(
        id=task_id,
        category=cat,
        context=encode_context(cat, kind.query_type, difficulty),
        required_tools=kind.tools,
        answer_key=f"{cat.value.lower()}-{kind.query_type}",
        query_type=kind.query_type,
    )


def sample_tasks(spec: EnvSpec, n: int, seed: int, stream: int, prefix: str) -> list[TaskInstance]:
    rng = np.random.default_rng([seed, stream])
    return [sample_task(spec, rng, f"{prefix}{i:05d}") for i in range(n)]


def task_noise(seed: int, n: int) -> np.ndarray:
    """Per-task uniforms for coupled judging, indexed by eval-task position."""
    return np.random.default_rng([seed, NOISE_STREAM]).random(n)


def correct_prob(profile: ReasonerProfile, task: TaskInstance, chosen: ToolSet) -> float:
    logit = profile.base_logit_by_category[task.category.index] - profile.difficulty_weight * task.difficulty
    req = task.required_tools
    for t in chosen:
        if t in req:
            logit += profile.tool_gain[t]
        else:
            logit -= profile.distraction_penalty[t]
    return logistic(logit)


def _correct(profile: ReasonerProfile, prob: float, u: float) -> bool:
    if profile.deterministic:
        return prob >= 0.5
    return u < prob


def judge(
    profile: ReasonerProfile,
    task: TaskInstance,
    chosen: ToolSet,
    rng: np.random.Generator | None = None,
    *,
    u: float | None = None,
) -> Verdict:
    """Baseline and tool-augmented correctness under one shared uniform.

    Pass ``u`` to reuse a task's draw across several tool sets; otherwise one
    is taken from ``rng``.
    """
    if u is None:
        if rng is None:
            raise ValueError("judge needs either rng or u")
        u = float(rng.random())
    base = _correct(profile, correct_prob(profile, task, ToolSet((), chosen.k)), u)
    tool = _correct(profile, correct_prob(profile, task, chosen), u)
    return Verdict(base_correct=base, tool_correct=tool)


def oracle_correct(profile: ReasonerProfile, task: TaskInstance, u: float) -> tuple[bool, int]:
    """Whether any single-tool run succeeds, and the best single tool."""
    k = profile.k
    probs = [correct_prob(profile, task, ToolSet((j,), k)) for j in range(k)]
    best = int(np.argmax(probs))
    return any(_correct(profile, p, u) for p in probs), best


def oracle_accuracy(profile: ReasonerProfile, tasks: Sequence[TaskInstance], noise: Sequence[float]) -> float:
    if not tasks:
        raise EmptyTaskSet("oracle accuracy needs at least one task")
    hits = sum(oracle_correct(profile, t, float(u))[0] for t, u in zip(tasks, noise, strict=True))
    return hits / len(tasks)


# -- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class EnvConfig:
    """Everything a shipped env file holds."""

    spec: EnvSpec
    profiles: Mapping[str, ReasonerProfile]
    heuristic_map: Mapping[Category, ToolSet]
    version: int = 1

    def profile(self, name: str) -> ReasonerProfile:
        try:
            return self.profiles[name]
        except KeyError:
            raise EnvConfigError(f"unknown profile {name!r}; available: {sorted(self.profiles)}") from None


def _category(name: str) -> Category:
    try:
        return Category(name)
    except ValueError:
        raise EnvConfigError(f"unknown category {name!r}") from None


def env_from_dict(d: Mapping[str, Any]) -> EnvConfig:
    try:
        s = d["spec"]
        k = int(s.get("K", NUM_TOOLS))
        dist = {
            _category(cat): tuple(
                QueryKind(int(e["query_type"]), ToolSet.of(e["tools"], k), float(e["prob"])) for e in entries
            )
            for cat, entries in s["required_set_distribution"].items()
        }
        spec = EnvSpec(
            k=k,
            d=int(s.get("D", FEATURE_DIM)),
            category_mix=tuple(s["category_mix"]),
            required_set_distribution=dist,
            difficulty_range=tuple(s["difficulty_range"]),
            eval_size=int(s.get("eval_size", 2000)),
            train_size=int(s.get("train_size", 2000)),
            seed=int(s.get("seed", 7)),
            name=str(d.get("name", "custom")),
        )
        profiles = {name: ReasonerProfile.from_dict(name, p) for name, p in d["profiles"].items()}
        heuristic = {_category(c): ToolSet.of(v, k) for c, v in d.get("heuristic_map", {}).items()}
    except KeyError as exc:
        raise EnvConfigError(f"env config missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, EnvConfigError):
            raise
        raise EnvConfigError(f"invalid env config: {exc}") from exc
    for p in profiles.values():
        if p.k != k:
            raise EnvConfigError(f"profile {p.name} has {p.k} tools, env has K={k}")
    return EnvConfig(spec=spec, profiles=profiles, heuristic_map=heuristic, version=int(d.get("version", 1)))


def load_env(path: str | Path) -> EnvConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise EnvConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return env_from_dict(raw)


def default_env_path() -> Path:
    return Path(str(resources.files("autagent") / "envs" / "default.json"))


def default_env() -> EnvConfig:
    return load_env(default_env_path())


@dataclass
class SimEnvironment:
    """An env config bound to one reasoner profile, with seeded task pools."""

    config: EnvConfig
    profile: ReasonerProfile

    @property
    def spec(self) -> EnvSpec:
        return self.config.spec

    @property
    def k(self) -> int:
        return self.spec.k

    def train_tasks(self, seed: int) -> list[TaskInstance]:
        return sample_tasks(self.spec, self.spec.train_size, seed, TRAIN_STREAM, "train-")

    def eval_tasks(self, seed: int, n: int | None = None) -> list[TaskInstance]:
        return sample_tasks(self.spec, self.spec.eval_size if n is None else n, seed, EVAL_STREAM, "eval-")

    def with_profile(self, profile: ReasonerProfile) -> "SimEnvironment":
        return SimEnvironment(self.config, profile)
