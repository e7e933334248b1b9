"""Command-line adapters for the speech and emotion tools, plus hash-keyed mocks."""

from __future__ import annotations

import hashlib
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Union

from ..core import TOOL_NAMES, AutagError, ToolOutput
from .schema import parse_tool_json

EXTERNAL_TOOLS = (0, 1)
DEFAULT_TIMEOUT_S = 60.0
DEFAULT_MAX_PROCESSES = 2


class AdapterFailure(AutagError):
    def __init__(self, message: str, stderr: str = "") -> None:
        super().__init__(message)
        self.stderr = stderr


class AdapterNotConfigured(AutagError):
    pass


@dataclass(frozen=True)
class AdapterSpec:
    """An external command; ``{audio}`` in argv is replaced by the WAV path."""

    tool_id: int
    argv: tuple[str, ...]
    timeout_s: float = DEFAULT_TIMEOUT_S

    def __post_init__(self) -> None:
        object.__setattr__(self, "argv", tuple(self.argv))
        if self.tool_id not in EXTERNAL_TOOLS:
            raise ValueError(f"adapters exist only for tools {EXTERNAL_TOOLS}")
        if not self.argv:
            raise ValueError("adapter argv is empty")
        if not self.timeout_s > 0:
            raise ValueError("timeout_s must be positive")

    def command(self, audio_path: str | Path) -> list[str]:
        return [a.replace("{audio}", str(audio_path)) for a in self.argv]


@dataclass(frozen=True)
class MockAdapter:
    """Canned outputs keyed by the sha256 hex digest of the audio file."""

    tool_id: int
    fixtures: Mapping[str, Any] = field(default_factory=dict)
    default: Any = None

    def __post_init__(self) -> None:
        if self.tool_id not in EXTERNAL_TOOLS:
            raise ValueError(f"adapters exist only for tools {EXTERNAL_TOOLS}")


Adapter = Union[AdapterSpec, MockAdapter]


def adapter_from_dict(d: Mapping[str, Any]) -> Adapter:
    tool_id = int(d["tool_id"])
    if "mock" in d:
        return MockAdapter(tool_id, dict(d["mock"]), d.get("default"))
    return AdapterSpec(tool_id, tuple(d["argv"]), float(d.get("timeout_s", DEFAULT_TIMEOUT_S)))


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class ProcessLimiter:
    """Caps how many adapter subprocesses run at once."""

    def __init__(self, limit: int = DEFAULT_MAX_PROCESSES) -> None:
        if limit < 1:
            raise ValueError("limit must be >= 1")
        self.limit = limit
        self._sem = threading.BoundedSemaphore(limit)

    def __enter__(self):
        self._sem.acquire()
        return self

    def __exit__(self, *exc):
        self._sem.release()
        return False


DEFAULT_LIMITER = ProcessLimiter()


def run_external_tool(
    tool_id: int,
    audio_path: str | Path,
    adapter: Adapter | None,
    limiter: ProcessLimiter = DEFAULT_LIMITER,
) -> ToolOutput:
    if tool_id not in EXTERNAL_TOOLS:
        raise ValueError(f"tool {tool_id} is not an external tool")
    if adapter is None:
        raise AdapterNotConfigured("adapter not configured")
    if adapter.tool_id != tool_id:
        raise AdapterNotConfigured(f"adapter is for tool {adapter.tool_id}, not {tool_id}")
    if isinstance(adapter, MockAdapter):
        digest = file_sha256(audio_path)
        payload = adapter.fixtures.get(digest, adapter.default)
        if payload is None:
            raise AdapterFailure(f"no mock fixture for {Path(audio_path).name} (sha256 {digest[:12]})")
        return ToolOutput(tool_id, TOOL_NAMES[tool_id], payload)
    cmd = adapter.command(audio_path)
    with limiter:
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True, timeout=adapter.timeout_s)
        except subprocess.TimeoutExpired as exc:
            err = exc.stderr.decode(errors="replace") if isinstance(exc.stderr, bytes) else (exc.stderr or "")
            raise AdapterFailure(f"{cmd[0]} timed out after {adapter.timeout_s} s", err) from exc
        except OSError as exc:
            raise AdapterFailure(f"cannot run {cmd[0]}: {exc}") from exc
    if proc.returncode != 0:
        raise AdapterFailure(f"{cmd[0]} exited with status {proc.returncode}: {proc.stderr.strip()}", proc.stderr)
    return parse_tool_json(proc.stdout, tool_id)
