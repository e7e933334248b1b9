"""GRPO training of the tool-selection policy against a frozen reasoner."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .core import AutagError, TaskInstance, ToolSet, Verdict
from .policy import (
    ActionSample,
    ParamGrad,
    PolicyParams,
    action_logprob,
    inclusion_probs,
    sample_action,
)
from .simenv import SimEnvironment, judge

ADV_EPS = 1e-12
STALE_TOL = 1e-9


class StaleRollout(AutagError):
    pass


class TrainingDiverged(AutagError):
    def __init__(self, message: str, record: dict):
        super().__init__(message)
        self.record = record


class RewardMode(str, Enum):
    DIFFERENTIAL = "Differential"
    BINARY = "Binary"

    @classmethod
    def parse(cls, s: "str | RewardMode") -> "RewardMode":
        if isinstance(s, RewardMode):
            return s
        for m in cls:
            if m.value.lower() == str(s).lower():
                return m
        raise ValueError(f"unknown reward mode {s!r}")


@dataclass(frozen=True)
class TrainConfig:
    group_size: int = 6
    # 1e-6 is the LALM rate; the linear policy with the 1/K token average needs a far larger step.
    learning_rate: float = 4.0
    steps: int = 200
    batch_size: int = 8
    clip_eps: float = 0.2
    kl_beta: float = 0.04
    reward_mode: RewardMode = RewardMode.DIFFERENTIAL
    seed: int = 7
    optimizer: str = "sgd"
    adv_std: str = "population"
    temperature: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "reward_mode", RewardMode.parse(self.reward_mode))
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")
        if not 0.0 < self.clip_eps < 1.0:
            raise ValueError("clip_eps must lie in (0, 1)")
        if self.kl_beta < 0:
            raise ValueError("kl_beta must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.steps < 0 or self.batch_size < 1:
            raise ValueError("steps must be >= 0 and batch_size >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be 'sgd' or 'adam'")
        if self.adv_std not in ("population", "sample"):
            raise ValueError("adv_std must be 'population' or 'sample'")


def differential_reward(v: Verdict) -> int:
    return int(v.tool_correct) - int(v.base_correct)


def binary_reward(v: Verdict) -> int:
    return int(v.tool_correct)


def reward_for(mode: RewardMode, v: Verdict) -> int:
    return differential_reward(v) if mode is RewardMode.DIFFERENTIAL else binary_reward(v)


def group_advantages(rewards: Sequence[float], std: str = "population") -> np.ndarray:
    r = np.asarray(rewards, dtype=float)
    if r.size < 2:
        raise ValueError("a group needs at least two samples")
    sd = r.std(ddof=0 if std == "population" else 1)
    if sd < ADV_EPS:
        return np.zeros_like(r)
    return (r - r.mean()) / sd


@dataclass(frozen=True)
class GroupRollout:
    task_id: str
    context: tuple[float, ...]
    samples: tuple[ActionSample, ...]
    rewards: tuple[float, ...]
    advantages: tuple[float, ...]
    base_correct: bool

    def __post_init__(self) -> None:
        if not len(self.samples) == len(self.rewards) == len(self.advantages):
            raise ValueError("samples, rewards and advantages must have equal length")


@dataclass(frozen=True)
class StepStats:
    objective: float
    mean_reward: float
    frac_pos: float
    frac_neg: float
    mean_abs_adv: float
    clip_frac: float
    mean_kl: float
    grad_norm: float


def collect_group(
    params: PolicyParams,
    task: TaskInstance,
    env: SimEnvironment,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> GroupRollout:
    """Baseline once, then G sampled tool sets judged under the same task draw."""
    u = float(rng.random())
    empty = ToolSet((), params.k)
    base = judge(env.profile, task, empty, u=u).base_correct
    samples, rewards = [], []
    for _ in range(cfg.group_size):
        s = sample_action(params, task.context, rng)
        v = Verdict(base_correct=base, tool_correct=judge(env.profile, task, s.action, u=u).tool_correct)
        samples.append(s)
        rewards.append(float(reward_for(cfg.reward_mode, v)))
    adv = group_advantages(rewards, cfg.adv_std)
    return GroupRollout(
        task_id=task.id,
        context=task.context,
        samples=tuple(samples),
        rewards=tuple(rewards),
        advantages=tuple(float(a) for a in adv),
        base_correct=base,
    )


def check_fresh(old_params: PolicyParams, rollouts: Sequence[GroupRollout]) -> None:
    for ro in rollouts:
        for s in ro.samples:
            again = action_logprob(old_params, ro.context, s.action).token_logprobs
            if max(abs(a - b) for a, b in zip(again, s.token_logprobs)) > STALE_TOL:
                raise StaleRollout(f"rollout for {ro.task_id} was not sampled under old_params")


def objective_and_grad(
    params: PolicyParams,
    old_params: PolicyParams,
    ref_params: PolicyParams,
    rollouts: Sequence[GroupRollout],
    clip_eps: float,
    kl_beta: float,
) -> tuple[float, ParamGrad, dict]:
    """Clipped surrogate minus KL penalty, averaged over tokens then samples.

    ``clip_eps`` may be ``inf`` to disable clipping.
    """
    k, d = params.k, params.d
    gw = np.zeros((k, d))
    gb = np.zeros(k)
    total = 0.0
    n_samples = 0
    n_clipped = 0
    kl_sum = 0.0
    inv_t = 1.0 / params.temperature
    for ro in rollouts:
        x = np.asarray(ro.context, dtype=float)
        p = inclusion_probs(params, x)
        p_ref = inclusion_probs(ref_params, x)
        mask = np.array([s.action.mask() for s in ro.samples])  # (G, K)
        old_lp = np.array([s.token_logprobs for s in ro.samples])
        adv = np.asarray(ro.advantages, dtype=float)[:, None]

        tok = np.where(mask, p, 1.0 - p)
        tok_ref = np.where(mask, p_ref, 1.0 - p_ref)
        ratio = np.exp(np.log(tok) - old_lp)
        clipped_ratio = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps)
        surr = np.minimum(ratio * adv, clipped_ratio * adv)
        r_ref = tok_ref / tok
        kl = r_ref - np.log(r_ref) - 1.0
        total += float(np.sum(surr - kl_beta * kl)) / k

        # min() takes the constant clipped branch only strictly outside the trust region.
        clip_active = ((adv > 0) & (ratio > 1.0 + clip_eps)) | ((adv < 0) & (ratio < 1.0 - clip_eps))
        coef = np.where(clip_active, 0.0, ratio * adv) + kl_beta * (r_ref - 1.0)
        dlogit = np.sum(coef * (mask - p), axis=0) * inv_t / k
        gw += np.outer(dlogit, x)
        gb += dlogit

        n_samples += mask.shape[0]
        n_clipped += int(np.sum((ratio > 1.0 + clip_eps) | (ratio < 1.0 - clip_eps)))
        kl_sum += float(np.sum(kl))
    if n_samples == 0:
        raise ValueError("no samples in batch")
    grad = ParamGrad(gw / n_samples, gb / n_samples)
    info = {
        "clip_frac": n_clipped / (n_samples * k),
        "mean_kl": kl_sum / (n_samples * k),
    }
    return total / n_samples, grad, info


def surrogate_objective(params, old_params, ref_params, rollouts, clip_eps, kl_beta) -> float:
    return objective_and_grad(params, old_params, ref_params, rollouts, clip_eps, kl_beta)[0]


def _step_stats(rollouts: Sequence[GroupRollout], objective: float, grad: ParamGrad, info: dict) -> StepStats:
    rewards = np.concatenate([np.asarray(r.rewards) for r in rollouts])
    adv = np.concatenate([np.asarray(r.advantages) for r in rollouts])
    return StepStats(
        objective=objective,
        mean_reward=float(rewards.mean()),
        frac_pos=float(np.mean(rewards > 0)),
        frac_neg=float(np.mean(rewards < 0)),
        mean_abs_adv=float(np.mean(np.abs(adv))),
        clip_frac=info["clip_frac"],
        mean_kl=info["mean_kl"],
        grad_norm=grad.norm(),
    )


def grpo_step(
    params: PolicyParams,
    old_params: PolicyParams,
    ref_params: PolicyParams,
    rollouts: Sequence[GroupRollout],
    cfg: TrainConfig,
) -> tuple[PolicyParams, StepStats]:
    """One full-batch gradient-ascent step on the clipped, KL-penalized objective."""
    check_fresh(old_params, rollouts)
    obj, grad, info = objective_and_grad(params, old_params, ref_params, rollouts, cfg.clip_eps, cfg.kl_beta)
    stats = _step_stats(rollouts, obj, grad, info)
    if not (math.isfinite(obj) and math.isfinite(stats.grad_norm)):
        return params, stats
    new = params.replace(
        weights=params.weights + cfg.learning_rate * grad.weights,
        biases=params.biases + cfg.learning_rate * grad.biases,
    )
    return new, stats


@dataclass
class _Adam:
    lr: float
    b1: float = 0.9
    b2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def ascend(self, params: PolicyParams, grad: ParamGrad) -> PolicyParams:
        gs = [grad.weights, grad.biases]
        if not self.m:
            self.m = [np.zeros_like(g) for g in gs]
            self.v = [np.zeros_like(g) for g in gs]
        self.t += 1
        out = []
        for i, (theta, g) in enumerate(zip([params.weights, params.biases], gs)):
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
            mh = self.m[i] / (1 - self.b1**self.t)
            vh = self.v[i] / (1 - self.b2**self.t)
            out.append(theta + self.lr * mh / (np.sqrt(vh) + self.eps))
        return params.replace(weights=out[0], biases=out[1])


def _tool_freq(rollouts: Sequence[GroupRollout], k: int) -> list[int]:
    freq = [0] * (k + 1)
    for ro in rollouts:
        for s in ro.samples:
            if len(s.action) == 0:
                freq[0] += 1
            for t in s.action:
                freq[t + 1] += 1
    return freq


def train(
    cfg: TrainConfig,
    env: SimEnvironment,
    init_params: PolicyParams | None = None,
    log_writer: Callable[[dict], None] | None = None,
) -> tuple[PolicyParams, list[dict]]:
    """Run the GRPO loop, returning the final params and one log record per step.

    The reference policy is the initial policy; ``old_params`` is refreshed
    every step, so each batch is optimized exactly once.
    """
    k = env.k
    params = init_params or PolicyParams.zeros(k, env.spec.d, cfg.temperature)
    ref = params
    pool = env.train_tasks(cfg.seed)
    adam = _Adam(cfg.learning_rate) if cfg.optimizer == "adam" else None
    log: list[dict] = []
    for step in range(cfg.steps):
        picker = np.random.default_rng([cfg.seed, 1_000_003, step])
        batch_idx = picker.choice(len(pool), size=min(cfg.batch_size, len(pool)), replace=False)
        old = params
        rollouts = [
            collect_group(old, pool[int(i)], env, cfg, np.random.default_rng([cfg.seed, step, j]))
            for j, i in enumerate(batch_idx)
        ]
        if adam is None:
            params, stats = grpo_step(params, old, ref, rollouts, cfg)
        else:
            check_fresh(old, rollouts)
            obj, grad, info = objective_and_grad(params, old, ref, rollouts, cfg.clip_eps, cfg.kl_beta)
            stats = _step_stats(rollouts, obj, grad, info)
            if math.isfinite(obj) and math.isfinite(stats.grad_norm):
                params = adam.ascend(params, grad)
        freq = _tool_freq(rollouts, k)
        n = sum(len(r.samples) for r in rollouts)
        record = {
            "step": step,
            "mode": cfg.reward_mode.value,
            "mean_reward": stats.mean_reward,
            "frac_pos": stats.frac_pos,
            "frac_neg": stats.frac_neg,
            "mean_abs_adv": stats.mean_abs_adv,
            "mean_kl": stats.mean_kl,
            "clip_frac": stats.clip_frac,
            "grad_norm": stats.grad_norm,
            "objective": stats.objective,
            "tool_freq": freq,
            "avg_tools": sum(freq[1:]) / n,
        }
        if not (math.isfinite(stats.objective) and math.isfinite(stats.grad_norm)):
            record["error"] = "non-finite objective or gradient"
            log.append(record)
            if log_writer:
                log_writer(record)
            raise TrainingDiverged(f"training diverged at step {step}", record)
        log.append(record)
        if log_writer:
            log_writer(record)
    return params, log
