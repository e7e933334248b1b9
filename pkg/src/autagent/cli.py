"""Command-line entry point: ``autagent <subcommand> ...``.

Exit status is 0 on success, 2 for configuration or usage errors and 3 for
tool or runtime failures (reported as a JSON ``{"error": ...}`` object).
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Callable, Iterator, Sequence

import numpy as np
from filelock import FileLock, Timeout

from . import bench
from .agent import DatasetError, evaluate_external, load_mcq_jsonl, policy_selector, reasoner_from_dict
from .audiodsp import synth as synthmod
from .audiodsp.audio import AudioError, InvalidParameter, write_wav
from .audiodsp.schema import dumps
from .audiodsp.tools import resolve_tool, run_tool
from .config import ConfigError, RunConfig, effective_seed, load_run_config
from .core import AutagError
from .policy import CheckpointMismatch, PolicyParams, checkpoint_bytes, load_checkpoint
from .simenv import SimEnvironment
from .trainer import RewardMode, TrainingDiverged, train

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
CHECKPOINT_NAME = "checkpoint.autag"
TRAIN_LOG_NAME = "train.jsonl"
LOCK_NAME = ".autagent.lock"

log = logging.getLogger("autagent")


class RuntimeFailure(AutagError):
    pass


# -- atomic persistence --------------------------------------------------------


@contextlib.contextmanager
def atomic_writer(path: Path, mode: str = "w") -> Iterator[Any]:
    """Write to a sibling temp file and rename over ``path`` only on success."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if "b" in mode else {"encoding": "utf-8", "newline": ""})) as f:
            yield f
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def write_atomic(path: Path, data: str | bytes) -> None:
    with atomic_writer(path, "wb" if isinstance(data, bytes) else "w") as f:
        f.write(data)


@contextlib.contextmanager
def output_lock(out_dir: Path) -> Iterator[None]:
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(out_dir / LOCK_NAME))
    try:
        lock.acquire(timeout=0)
    except Timeout:
        raise RuntimeFailure(f"output directory {out_dir} is in use by another run") from None
    try:
        yield
    finally:
        lock.release()


def _emit(obj: Any) -> None:
    print(json.dumps(obj))


# -- shared setup ----------------------------------------------------------------


def _load(args: argparse.Namespace) -> RunConfig:
    cfg = load_run_config(args.config)
    seed = effective_seed(cfg, getattr(args, "seed", None))
    cfg = cfg.with_train(seed=seed)
    if getattr(args, "reward", None):
        try:
            cfg = cfg.with_train(reward_mode=RewardMode.parse(args.reward))
        except ValueError as exc:
            raise ConfigError(f"--reward: {exc}") from exc
    overrides: dict[str, Any] = {}
    for flag, key in (("steps", "steps"), ("lr", "learning_rate"), ("group_size", "group_size"), ("batch_size", "batch_size")):
        if getattr(args, flag, None) is not None:
            overrides[key] = getattr(args, flag)
    if overrides:
        cfg = cfg.with_train(**overrides)
    if getattr(args, "output_dir", None):
        cfg = cfg.with_overrides(output_dir=Path(args.output_dir))
    if getattr(args, "profile", None):
        if args.profile not in cfg.env.profiles:
            raise ConfigError(f"--profile: unknown reasoner profile {args.profile!r}; env defines {sorted(cfg.env.profiles)}")
        cfg = cfg.with_overrides(profile=args.profile)
    if getattr(args, "eval_size", None) is not None:
        if args.eval_size < 1:
            raise ConfigError("--eval-size: must be positive")
        cfg = cfg.with_overrides(eval_size=args.eval_size)
    return cfg


def _env(cfg: RunConfig, profile: str | None = None) -> SimEnvironment:
    return SimEnvironment(cfg.env, cfg.env.profile(profile or cfg.profile))


def _checkpoint(cfg: RunConfig, path: str | None, required: bool) -> PolicyParams | None:
    p = Path(path) if path else cfg.output_dir / CHECKPOINT_NAME
    if not p.exists():
        if required or path:
            raise ConfigError(f"checkpoint not found: {p}")
        return None
    params, _ = load_checkpoint(p, k=cfg.env.spec.k, d=cfg.env.spec.d)
    return params


def _stem_name(prefix: str, cfg: RunConfig, profile: str, seed: int) -> str:
    return bench.safe_name(f"{prefix}_{cfg.env.spec.name}_{profile}_{seed}")


# -- subcommands -------------------------------------------------------------------


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load(args)
    env = _env(cfg)
    out = cfg.output_dir
    with output_lock(out):
        with atomic_writer(out / TRAIN_LOG_NAME) as f:
            writer: Callable[[dict], None] = lambda rec: f.write(json.dumps(rec) + "\n")  # noqa: E731
            try:
                params, records = train(cfg.train, env, log_writer=writer)
            except TrainingDiverged as exc:
                f.flush()
                diverged = exc
            else:
                diverged = None
        if diverged is not None:
            raise RuntimeFailure(str(diverged))
        write_atomic(out / CHECKPOINT_NAME, checkpoint_bytes(params, cfg.train.steps))
    tasks = env.eval_tasks(cfg.train.seed, cfg.eval_size)
    res = bench.run_strategy(bench.Strategy.trained(params), env, tasks, cfg.train.seed)
    _emit(
        {
            "final_mean_reward": records[-1]["mean_reward"] if records else 0.0,
            "eval_accuracy": res.accuracy,
            "avg_tools": res.avg_tools,
            "mode": cfg.train.reward_mode.value,
            "seed": cfg.train.seed,
            "checkpoint": str(out / CHECKPOINT_NAME),
        }
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load(args)
    params = _checkpoint(cfg, args.checkpoint, required=True)
    if cfg.mode == "external":
        if cfg.dataset is None:
            raise ConfigError("dataset: required in external mode")
        if cfg.reasoner is None:
            raise ConfigError("reasoner: required in external mode (argv command or mock table)")
        items = load_mcq_jsonl(cfg.dataset)
        result = evaluate_external(items, policy_selector(params), reasoner_from_dict(cfg.reasoner), cfg.adapters)
        _emit(result)
        return EXIT_OK
    env = _env(cfg)
    seed = cfg.train.seed
    tasks = env.eval_tasks(seed, cfg.eval_size)
    trained = bench.run_strategy(bench.Strategy.trained(params), env, tasks, seed)
    base = bench.run_strategy(bench.Strategy.no_tool(), env, tasks, seed)
    _emit(
        {
            "profile": env.profile.name,
            "seed": seed,
            "eval_size": len(tasks),
            "accuracy": trained.accuracy,
            "no_tool_accuracy": base.accuracy,
            "avg_tools": trained.avg_tools,
            "category_accuracy": dict(trained.category_accuracy),
            "tool_freq": list(trained.tool_freq),
        }
    )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _load(args)
    env = _env(cfg)
    wanted = [s.strip() for s in (args.strategies or "").split(",") if s.strip()]
    params = None
    if not wanted:
        params = _checkpoint(cfg, args.checkpoint, required=False)
        if params is None:
            log.warning("no checkpoint found; the Trained row is omitted (run `autagent train` first)")
    elif "Trained" in wanted:
        params = _checkpoint(cfg, args.checkpoint, required=True)
    strategies = bench.default_strategies(env.k, params)
    if wanted:
        try:
            strategies = bench.filter_strategies(strategies, wanted)
        except ValueError as exc:
            raise ConfigError(f"--strategies: {exc}") from exc
    seed = cfg.train.seed
    report = bench.run_bench(env, seed, strategies, cfg.eval_size)
    out = cfg.output_dir
    stem = bench.safe_name(report.stem)
    with output_lock(out):
        write_atomic(out / f"{stem}.csv", bench.report_csv(report))
        write_atomic(out / f"{stem}.md", bench.report_markdown(report))
        hists = {r.strategy: r.tool_freq for r in report.rows}
        write_atomic(out / f"histogram{stem[len('report'):]}.csv", bench.histogram_csv(hists))
    sys.stdout.write(bench.report_markdown(report))
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = _load(args)
    env = _env(cfg)
    seed = cfg.train.seed
    res = bench.ablation(cfg.train, env, seed, cfg.eval_size)
    header, rows = bench.ablation_records(res)
    out = cfg.output_dir
    stem = _stem_name("ablation", cfg, env.profile.name, seed)
    with output_lock(out):
        write_atomic(out / f"{stem}.csv", bench.to_csv(header, rows))
        write_atomic(out / f"{stem}.md", bench.markdown_table(header, rows))
        for mode, params in res.params.items():
            write_atomic(out / f"checkpoint_{mode.lower()}.autag", checkpoint_bytes(params, cfg.train.steps))
    sys.stdout.write(bench.markdown_table(header, rows))
    return EXIT_OK


def cmd_transfer(args: argparse.Namespace) -> int:
    cfg = _load(args)
    source = args.source or cfg.profile
    target = args.target or cfg.transfer_profile
    for flag, name in (("--source", source), ("--target", target)):
        if name not in cfg.env.profiles:
            raise ConfigError(f"{flag}: unknown reasoner profile {name!r}")
    env_a = _env(cfg, source)
    res, params_a, params_b = bench.train_and_transfer(cfg.train, env_a, cfg.env.profile(target), cfg.eval_size)
    header, rows = bench.transfer_records(res)
    out = cfg.output_dir
    stem = _stem_name("transfer", cfg, f"{source}-to-{target}", cfg.train.seed)
    with output_lock(out):
        write_atomic(out / f"{stem}.csv", bench.to_csv(header, rows))
        write_atomic(out / f"{stem}.md", bench.markdown_table(header, rows))
        write_atomic(out / f"checkpoint_{bench.safe_name(source)}.autag", checkpoint_bytes(params_a, cfg.train.steps))
        write_atomic(out / f"checkpoint_{bench.safe_name(target)}.autag", checkpoint_bytes(params_b, cfg.train.steps))
    sys.stdout.write(bench.markdown_table(header, rows))
    return EXIT_OK


def cmd_tools(args: argparse.Namespace) -> int:
    try:
        tool_id = resolve_tool(args.tool)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    adapters = load_run_config(args.config).adapters if args.config else {}
    try:
        out = run_tool(tool_id, args.wav, adapters)
        text = dumps(out)
    except (AutagError, OSError) as exc:
        _emit({"error": str(exc)})
        return EXIT_RUNTIME
    print(text)
    return EXIT_OK


_SYNTH_KINDS = {"tone": "tone", "click": "click_track", "click_track": "click_track", "triad": "triad", "noise": "noise", "am": "am_tone", "am_tone": "am_tone"}


def _num(x: float) -> int | float:
    return int(x) if float(x).is_integer() else float(x)


def cmd_synth(args: argparse.Namespace) -> int:
    kind = _SYNTH_KINDS[args.kind]
    params: dict[str, Any] = {}
    if kind in ("tone", "am_tone") and args.f0 is not None:
        params["f0"] = args.f0
    if kind == "tone" and args.f0 is None:
        raise ConfigError("synth tone: --f0 is required")
    if kind == "click_track":
        if args.bpm is None:
            raise ConfigError("synth click: --bpm is required")
        params["bpm"] = args.bpm
    if kind == "triad":
        if args.root is None:
            raise ConfigError("synth triad: --root is required")
        params["root"], params["quality"] = args.root, args.quality
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    try:
        audio = synthmod.synth(kind, args.dur, args.sr, rng, **params)
    except InvalidParameter as exc:
        raise ConfigError(f"synth {args.kind}: {exc}") from exc
    out = Path(args.out)
    with atomic_writer(out, "wb") as f:
        write_wav(f, audio)
    meta: dict[str, Any] = {"kind": kind}
    meta.update({k: (_num(v) if isinstance(v, (int, float)) else v) for k, v in params.items()})
    if kind == "triad":
        meta["frequencies"] = [round(f, 2) for f in synthmod.triad_frequencies(args.root, args.quality)]
    meta.update({"duration": _num(audio.duration), "sample_rate": audio.sample_rate, "path": str(out)})
    _emit(meta)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------


def _common(p: argparse.ArgumentParser, training: bool = False) -> None:
    p.add_argument("--config", help="run config JSON (default: packaged configs/default.json)")
    p.add_argument("--seed", type=int, help="overrides $AUTAG_SEED and the config seed")
    p.add_argument("--output-dir", help="directory for checkpoints, logs and reports")
    p.add_argument("--profile", help="reasoner profile name from the env file")
    p.add_argument("--eval-size", type=int, help="number of held-out evaluation tasks")
    if training:
        p.add_argument("--reward", help="Differential or Binary")
        p.add_argument("--steps", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--group-size", type=int)
        p.add_argument("--batch-size", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="autagent", description="Tool-selection policy training and audio tools.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a tool-selection policy in the simulator")
    _common(p, training=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint (simulator or external MCQ dataset)")
    _common(p)
    p.add_argument("--checkpoint", help=f"default: <output-dir>/{CHECKPOINT_NAME}")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="compare strategies and write report files")
    _common(p)
    p.add_argument("--checkpoint", help="policy for the Trained row")
    p.add_argument("--strategies", help="comma-separated subset, e.g. NoTool,Oracle")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ablate", help="train with both reward modes and compare")
    _common(p, training=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("transfer", help="train against two reasoners and swap policies")
    _common(p, training=True)
    p.add_argument("--source", help="profile the plugin policy is trained on")
    p.add_argument("--target", help="profile it is transferred to")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("tools", help="run one audio tool on a WAV file and print its JSON")
    p.add_argument("tool", help="tool id 0-5 or a name such as tempo, pitch, chord, sound, asr, emotion")
    p.add_argument("wav")
    p.add_argument("--config", help="run config providing adapters for the speech and emotion tools")
    p.set_defaults(func=cmd_tools)

    p = sub.add_parser("synth", help="write a synthesized test signal with known ground truth")
    p.add_argument("kind", choices=sorted(_SYNTH_KINDS))
    p.add_argument("out", help="output WAV path")
    p.add_argument("--f0", type=float)
    p.add_argument("--bpm", type=float)
    p.add_argument("--root")
    p.add_argument("--quality", default="maj", choices=("maj", "min"))
    p.add_argument("--dur", type=float, help="duration in seconds")
    p.add_argument("--sr", type=int, default=16000)
    p.add_argument("--seed", type=int, help="noise seed for click and noise signals")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DatasetError) as exc:
        print(f"autagent: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CheckpointMismatch, RuntimeFailure, AudioError, AutagError, OSError) as exc:
        _emit({"error": str(exc)})
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
