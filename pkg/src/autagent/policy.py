"""Linear-logistic tool-inclusion policy.

Each of the K tools gets an independent Bernoulli head; the K include/exclude
decisions of one sample are its token sequence, so per-token ratios and the
``1/|o|`` average of the clipped objective act on K tokens.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    FEATURE_DIM,
    NUM_TOOLS,
    AutagError,
    DimensionMismatch,
    ToolSet,
    feature_schema_hash,
)

PROB_FLOOR = 1e-6
CHECKPOINT_MAGIC = b"AUTAG1"
CHECKPOINT_VERSION = 1


class CheckpointMismatch(AutagError):
    pass


@dataclass(frozen=True)
class PolicyParams:
    weights: np.ndarray  # (K, D)
    biases: np.ndarray  # (K,)
    temperature: float = 1.0

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float)
        b = np.array(self.biases, dtype=float)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise DimensionMismatch(f"weights {w.shape} incompatible with biases {b.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("policy parameters must be finite")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)
        object.__setattr__(self, "temperature", float(self.temperature))

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, k: int = NUM_TOOLS, d: int = FEATURE_DIM, temperature: float = 1.0) -> "PolicyParams":
        return cls(np.zeros((k, d)), np.zeros(k), temperature)

    def replace(self, weights=None, biases=None) -> "PolicyParams":
        return PolicyParams(
            self.weights if weights is None else weights,
            self.biases if biases is None else biases,
            self.temperature,
        )


@dataclass(frozen=True)
class ActionSample:
    action: ToolSet
    token_logprobs: tuple[float, ...]
    total_logprob: float


def _check_context(params: PolicyParams, context) -> np.ndarray:
    x = np.asarray(context, dtype=float)
    if x.shape != (params.d,):
        raise DimensionMismatch(f"context has shape {x.shape}, policy expects ({params.d},)")
    return x


def logits(params: PolicyParams, context) -> np.ndarray:
    x = _check_context(params, context)
    return (params.weights @ x + params.biases) / params.temperature


def inclusion_probs(params: PolicyParams, context) -> np.ndarray:
    z = logits(params, context)
    p = 0.5 * (1.0 + np.tanh(0.5 * z))  # overflow-free logistic
    return np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)


def _sample_from_probs(p: np.ndarray, action_mask: np.ndarray) -> ActionSample:
    tok = np.where(action_mask, np.log(p), np.log1p(-p))
    return ActionSample(
        action=ToolSet.from_mask(action_mask),
        token_logprobs=tuple(float(t) for t in tok),
        total_logprob=float(math.fsum(tok)),
    )


def sample_action(params: PolicyParams, context, rng: np.random.Generator) -> ActionSample:
    p = inclusion_probs(params, context)
    include = rng.random(p.shape[0]) < p
    return _sample_from_probs(p, include)


def action_logprob(params: PolicyParams, context, action: ToolSet) -> ActionSample:
    p = inclusion_probs(params, context)
    if action.k != params.k:
        raise DimensionMismatch(f"action over {action.k} tools, policy has {params.k}")
    return _sample_from_probs(p, action.mask())


def greedy_action(params: PolicyParams, context, threshold: float = 0.5) -> ToolSet:
    return ToolSet.from_mask(inclusion_probs(params, context) >= threshold)


@dataclass(frozen=True)
class ParamGrad:
    """Gradient with the same layout as :class:`PolicyParams`."""

    weights: np.ndarray
    biases: np.ndarray

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.weights**2) + np.sum(self.biases**2)))


def grad_logprob(params: PolicyParams, context, action: ToolSet) -> ParamGrad:
    """Gradient of ``log pi(action | context)`` returned as a params-shaped container.

    The probability clamp is treated as the identity, so at saturation the
    gradient is the tiny ``(1 - p)`` rather than exactly zero.
    """
    x = _check_context(params, context)
    p = inclusion_probs(params, x)
    dlogit = (action.mask().astype(float) - p) / params.temperature
    return ParamGrad(np.outer(dlogit, x), dlogit)


def kl_token_estimate(p_new: float, p_ref: float, token_included: bool) -> float:
    """Per-token ``r - log r - 1`` with ``r = pi_ref(token) / pi_new(token)``; always >= 0."""
    if token_included:
        r = p_ref / p_new
    else:
        r = (1.0 - p_ref) / (1.0 - p_new)
    return r - math.log(r) - 1.0


def all_actions(k: int = NUM_TOOLS) -> list[ToolSet]:
    return [ToolSet.from_mask(bits) for bits in itertools.product([False, True], repeat=k)]


# -- checkpoints ------------------------------------------------------------


def checkpoint_bytes(params: PolicyParams, train_step: int = 0) -> bytes:
    body = {
        "version": CHECKPOINT_VERSION,
        "K": params.k,
        "D": params.d,
        "temperature": params.temperature,
        "weights": [float(v) for v in params.weights.ravel()],
        "biases": [float(v) for v in params.biases],
        "feature_schema_hash": feature_schema_hash(params.k),
        "train_step": int(train_step),
    }
    return CHECKPOINT_MAGIC + b"\n" + json.dumps(body, sort_keys=False).encode() + b"\n"


def parse_checkpoint(data: bytes, *, k: int | None = None, d: int | None = None) -> tuple[PolicyParams, int]:
    if not data.startswith(CHECKPOINT_MAGIC):
        raise CheckpointMismatch("not an AUTAG1 checkpoint (bad magic)")
    try:
        body = json.loads(data[len(CHECKPOINT_MAGIC):].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointMismatch(f"corrupt checkpoint body: {exc}") from exc
    ck, cd = int(body["K"]), int(body["D"])
    if body.get("feature_schema_hash") != feature_schema_hash(ck):
        raise CheckpointMismatch("feature schema hash mismatch")
    if (k is not None and ck != k) or (d is not None and cd != d):
        raise CheckpointMismatch(f"checkpoint K={ck}, D={cd}; expected K={k}, D={d}")
    w = np.asarray(body["weights"], dtype=float).reshape(ck, cd)
    params = PolicyParams(w, np.asarray(body["biases"], dtype=float), float(body["temperature"]))
    return params, int(body.get("train_step", 0))


def load_checkpoint(path: str | Path, **expect) -> tuple[PolicyParams, int]:
    return parse_checkpoint(Path(path).read_bytes(), **expect)
