"""Studio configuration: one JSON file wiring every front end to the engine.

Resolution order for the file itself: an explicit ``--config`` path, then the
DELF_CONFIG environment variable, then built-in defaults. Relative paths
inside the file resolve against the file's own directory, so a config can sit
next to its workdir and transcripts and be moved as a unit.

Credentials never appear here; the live backend reads DELF_API_KEY from the
environment at call time.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from ..ice_session import DEFAULT_MAX_AUTO_DEBUG, SessionEngine, SessionStore
from ..llm_gateway import BackendConfig, ChatBackend, GatewayError, ReplayBackend, make_backend
from ..prompt_engine import PromptEngine, load_templates
from ..sandbox_executor import ExecutionConfig

CONFIG_ENV_VAR = "DELF_CONFIG"

_KNOWN_KEYS = {
    "backend",
    "templates_dir",
    "workdir",
    "harness_command",
    "auto_debug_limit",
    "execution",
}
_KNOWN_BACKEND_KEYS = {"kind", "model", "endpoint", "transcript", "temperature", "timeout_seconds"}
_KNOWN_EXECUTION_KEYS = {"time_limit_seconds", "episodes", "max_steps", "seed"}


class ConfigError(ValueError):
    pass


def default_harness_command() -> tuple[str, ...]:
    """Run the bundled conformance harness with the current interpreter."""
    return (sys.executable, "-m", "envcheck")


@dataclass(frozen=True)
class StudioConfig:
    """Everything a front end needs to assemble a SessionEngine."""

    backend_kind: str = "live"
    model: str = "default"
    endpoint: str = ""
    transcript: str | None = None
    temperature: float = 0.0
    timeout_seconds: float = 30.0
    templates_dir: str | None = None
    workdir: str = "sessions"
    harness_command: tuple[str, ...] = field(default_factory=default_harness_command)
    auto_debug_limit: int = DEFAULT_MAX_AUTO_DEBUG
    time_limit_seconds: float = 60.0
    episodes: int = 3
    max_steps: int = 200
    seed: int = 0


def _resolve(base: Path, value: str) -> str:
    path = Path(value)
    return str(path if path.is_absolute() else base / path)


def config_from_dict(data: Mapping[str, Any], base_dir: Path) -> StudioConfig:
    unknown = set(data) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    backend = data.get("backend", {})
    if not isinstance(backend, Mapping):
        raise ConfigError("'backend' must be an object")
    unknown = set(backend) - _KNOWN_BACKEND_KEYS
    if unknown:
        raise ConfigError(f"unknown backend key(s): {', '.join(sorted(unknown))}")
    execution = data.get("execution", {})
    if not isinstance(execution, Mapping):
        raise ConfigError("'execution' must be an object")
    unknown = set(execution) - _KNOWN_EXECUTION_KEYS
    if unknown:
        raise ConfigError(f"unknown execution key(s): {', '.join(sorted(unknown))}")

    defaults = StudioConfig()
    harness = data.get("harness_command")
    if harness is not None:
        if not isinstance(harness, list) or not all(isinstance(p, str) for p in harness) or not harness:
            raise ConfigError("'harness_command' must be a nonempty list of strings")
        harness_command = (harness[0], *harness[1:])
    else:
        harness_command = defaults.harness_command

    templates_dir = data.get("templates_dir")
    transcript = backend.get("transcript")
    try:
        config = StudioConfig(
            backend_kind=str(backend.get("kind", defaults.backend_kind)),
            model=str(backend.get("model", defaults.model)),
            endpoint=str(backend.get("endpoint", defaults.endpoint)),
            transcript=_resolve(base_dir, transcript) if transcript else None,
            temperature=float(backend.get("temperature", defaults.temperature)),
            timeout_seconds=float(backend.get("timeout_seconds", defaults.timeout_seconds)),
            templates_dir=_resolve(base_dir, templates_dir) if templates_dir else None,
            workdir=_resolve(base_dir, str(data.get("workdir", defaults.workdir))),
            harness_command=harness_command,
            auto_debug_limit=int(data.get("auto_debug_limit", defaults.auto_debug_limit)),
            time_limit_seconds=float(execution.get("time_limit_seconds", defaults.time_limit_seconds)),
            episodes=int(execution.get("episodes", defaults.episodes)),
            max_steps=int(execution.get("max_steps", defaults.max_steps)),
            seed=int(execution.get("seed", defaults.seed)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    if config.auto_debug_limit < 0:
        raise ConfigError("auto_debug_limit must be nonnegative")
    return config


def load_config(path: str | Path | None = None) -> StudioConfig:
    """Load the config file named by ``path`` or DELF_CONFIG; defaults if neither."""
    if path is None:
        env = os.environ.get(CONFIG_ENV_VAR)
        path = env if env else None
    if path is None:
        return StudioConfig()
    file_path = Path(path)
    try:
        data = json.loads(file_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {file_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{file_path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{file_path} must hold a JSON object")
    return config_from_dict(data, file_path.resolve().parent)


class NullBackend:
    """Placeholder for commands that never query the model."""

    model = "none"

    def complete(self, conversation):  # pragma: no cover - guard path
        raise GatewayError(
            "no chat backend configured; set backend.kind and backend.endpoint in the config"
        )


def build_backend(config: StudioConfig, persistent_cursor: bool = False) -> ChatBackend:
    """Backend per config. ``persistent_cursor`` makes a replay transcript keep
    its position across processes (one CLI invocation per workflow step)."""
    backend_config = BackendConfig(
        kind=config.backend_kind,
        model=config.model,
        endpoint=config.endpoint,
        temperature=config.temperature,
        timeout_seconds=config.timeout_seconds,
        transcript_path=config.transcript,
    )
    if backend_config.kind == "replay" and persistent_cursor:
        assert config.transcript is not None
        return ReplayBackend(config.transcript, config.model, cursor_path=config.transcript + ".cursor")
    return make_backend(backend_config)


def build_engine(
    config: StudioConfig,
    *,
    backend: ChatBackend | None = None,
    executor=None,
    need_backend: bool = True,
    persistent_cursor: bool = False,
) -> SessionEngine:
    """Assemble the engine a config describes.

    ``need_backend=False`` substitutes a stub for commands that never query
    (init, approve, report), so those work before any backend is configured.
    """
    if backend is None:
        if need_backend:
            try:
                backend = build_backend(config, persistent_cursor=persistent_cursor)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        else:
            backend = NullBackend()
    workdir = Path(config.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    return SessionEngine(
        store=SessionStore(workdir),
        backend=backend,
        prompts=PromptEngine(load_templates(config.templates_dir)),
        execution=ExecutionConfig(
            harness_command=config.harness_command,
            time_limit_seconds=config.time_limit_seconds,
            episodes=config.episodes,
            max_steps=config.max_steps,
            seed=config.seed,
        ),
        max_auto_debug=config.auto_debug_limit,
        executor=executor,
    )
