"""Run configuration: one JSON file, with relative paths resolved against it."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .audiodsp.external import Adapter, adapter_from_dict
from .core import AutagError
from .simenv import EnvConfig, EnvConfigError, load_env
from .trainer import TrainConfig

SEED_ENV_VAR = "AUTAG_SEED"
MODES = ("sim", "external")
_TOP_KEYS = {
    "env",
    "profile",
    "transfer_profile",
    "output_dir",
    "mode",
    "eval_size",
    "train",
    "adapters",
    "dataset",
    "reasoner",
}


class ConfigError(AutagError):
    pass


@dataclass(frozen=True)
class RunConfig:
    env_path: Path
    env: EnvConfig
    profile: str = "open"
    transfer_profile: str = "closed"
    output_dir: Path = Path("runs")
    mode: str = "sim"
    eval_size: int | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    adapters: Mapping[int, Adapter] = field(default_factory=dict)
    dataset: Path | None = None
    reasoner: Mapping[str, Any] | None = None
    source: Path | None = None

    def with_overrides(self, **changes: Any) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def with_train(self, **changes: Any) -> "RunConfig":
        try:
            return dataclasses.replace(self, train=TrainConfig(**{**self.train.__dict__, **changes}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"train: {exc}") from exc


def default_config_path() -> Path:
    return Path(str(resources.files("autagent") / "configs" / "default.json"))


def _resolve(base: Path, value: str, what: str) -> Path:
    p = Path(value).expanduser()
    if not p.is_absolute():
        p = base / p
    if not p.exists():
        raise ConfigError(f"{what}: file not found: {p}")
    return p


def _train_config(raw: Any) -> TrainConfig:
    if not isinstance(raw, dict):
        raise ConfigError("train: expected an object")
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"train.{key}: unknown field (known: {', '.join(sorted(known))})")
    try:
        return TrainConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"train: {exc}") from exc


def config_from_dict(raw: Mapping[str, Any], base_dir: Path, source: Path | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    for key in raw:
        if key not in _TOP_KEYS:
            raise ConfigError(f"{key}: unknown config field")
    if "env" not in raw:
        raise ConfigError("env: required field missing")
    env_path = _resolve(base_dir, str(raw["env"]), "env")
    try:
        env = load_env(env_path)
    except EnvConfigError as exc:
        raise ConfigError(f"env ({env_path}): {exc}") from exc
    mode = raw.get("mode", "sim")
    if mode not in MODES:
        raise ConfigError(f"mode: must be one of {MODES}, got {mode!r}")
    profile = str(raw.get("profile", "open"))
    transfer_profile = str(raw.get("transfer_profile", "closed"))
    for key, name in (("profile", profile), ("transfer_profile", transfer_profile)):
        if name not in env.profiles:
            raise ConfigError(f"{key}: unknown reasoner profile {name!r}; env defines {sorted(env.profiles)}")
    eval_size = raw.get("eval_size")
    if eval_size is not None and (not isinstance(eval_size, int) or eval_size < 1):
        raise ConfigError("eval_size: must be a positive integer or null")
    adapters: dict[int, Adapter] = {}
    for i, spec in enumerate(raw.get("adapters", []) or []):
        try:
            a = adapter_from_dict(spec)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"adapters[{i}]: {exc}") from exc
        adapters[a.tool_id] = a
    dataset = raw.get("dataset")
    return RunConfig(
        env_path=env_path,
        env=env,
        profile=profile,
        transfer_profile=transfer_profile,
        output_dir=Path(raw.get("output_dir", "runs")),
        mode=mode,
        eval_size=eval_size,
        train=_train_config(raw.get("train", {})),
        adapters=adapters,
        dataset=_resolve(base_dir, dataset, "dataset") if dataset else None,
        reasoner=raw.get("reasoner"),
        source=source,
    )


def load_run_config(path: str | Path | None = None) -> RunConfig:
    """Load a run config; ``None`` means the packaged default."""
    path = default_config_path() if path is None else Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return config_from_dict(raw, path.resolve().parent, path)


def effective_seed(config: RunConfig, flag: int | None, environ: Mapping[str, str] = os.environ) -> int:
    """Flag, then the environment variable, then the config file."""
    if flag is not None:
        return flag
    if environ.get(SEED_ENV_VAR, "").strip():
        try:
            return int(environ[SEED_ENV_VAR])
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR}: not an integer: {environ[SEED_ENV_VAR]!r}") from None
    return config.train.seed
