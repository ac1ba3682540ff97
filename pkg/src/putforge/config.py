"""Project configuration: ``putforge.toml`` at the project root plus flag overrides."""
from __future__ import annotations

import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .code_model import DEFAULT_ASSERTION_NAMES
from .generator import ADAPTERS, DEFAULT_ROW_CAP
from .runner import DEFAULT_TIMEOUT

CONFIG_FILE = "putforge.toml"


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class Config:
    project_root: Path
    workspace: Path
    test_command: str
    workload_command: str | None = None
    adapter: str = "pytest"
    assertion_allow_list: tuple[str, ...] = DEFAULT_ASSERTION_NAMES
    provider_row_cap: int = DEFAULT_ROW_CAP
    per_row_timeout: float = DEFAULT_TIMEOUT
    retries: int = 0
    jobs: int = 1
    parallel_rows: bool = False
    per_site: bool = False
    max_records: int = 100_000
    exclude: tuple[str, ...] = ()

    @property
    def analysis_exclude(self) -> tuple[str, ...]:
        """Exclude patterns plus the workspace when it lives inside the project."""
        try:
            rel = self.workspace.relative_to(self.project_root).as_posix()
        except ValueError:
            return self.exclude
        return self.exclude + (f"{rel}/*",)


_KEYS = {f.name for f in fields(Config)} - {"project_root"}


def load_config(project_root, overrides: Mapping[str, Any] | None = None) -> Config:
    """Read ``putforge.toml`` (if present) and apply non-None ``overrides``."""
    root = Path(project_root).resolve()
    if not root.is_dir():
        raise ConfigError(f"project root {project_root} is not a directory")
    values: dict[str, Any] = {}
    path = root / CONFIG_FILE
    if path.exists():
        try:
            values = tomllib.loads(path.read_text(encoding="utf-8"))
        except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        unknown = sorted(set(values) - _KEYS)
        if unknown:
            raise ConfigError(f"{path}: unknown keys {', '.join(unknown)}")
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})

    if "workspace" not in values:
        raise ConfigError("no workspace configured (set `workspace` in putforge.toml or pass --workspace)")
    if "test_command" not in values:
        raise ConfigError("no test_command configured")
    ws = Path(values["workspace"])
    values["workspace"] = (ws if ws.is_absolute() else root / ws).resolve()
    for key in ("assertion_allow_list", "exclude"):
        if key in values:
            values[key] = tuple(values[key])
    try:
        cfg = Config(project_root=root, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    _validate(cfg)
    return cfg


def _validate(cfg: Config) -> None:
    if cfg.workspace == cfg.project_root:
        raise ConfigError("workspace must differ from the project root")
    if cfg.project_root.is_relative_to(cfg.workspace):
        raise ConfigError("workspace must not contain the project root")
    if cfg.adapter not in ADAPTERS:
        raise ConfigError(f"unknown adapter {cfg.adapter!r}; known: {', '.join(ADAPTERS)}")
    for name in ("provider_row_cap", "jobs", "max_records"):
        value = getattr(cfg, name)
        if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
            raise ConfigError(f"{name} must be a positive integer")
    if not isinstance(cfg.retries, int) or isinstance(cfg.retries, bool) or cfg.retries < 0:
        raise ConfigError("retries must be a non-negative integer")
    if not isinstance(cfg.per_row_timeout, (int, float)) or cfg.per_row_timeout <= 0:
        raise ConfigError("per_row_timeout must be positive")
    if not cfg.assertion_allow_list:
        raise ConfigError("assertion_allow_list must not be empty")
