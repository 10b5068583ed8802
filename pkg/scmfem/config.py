from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .schemas import StudyConfig
from .settings import AppSettings, load_settings

STUDY_KEYS = tuple(StudyConfig.model_fields)


@dataclass(frozen=True)
class AppConfig:
    settings: AppSettings
    runs_dir: Path
    study_defaults: dict[str, Any] = field(default_factory=dict)


def load_app_config(config_path: Optional[Path] = None) -> AppConfig:
    settings = load_settings()
    final_path = (config_path or settings.config_path).expanduser().resolve()

    runs_dir = settings.runs_dir
    study_defaults: dict[str, Any] = {}
    if final_path.exists():
        data = _read_json(final_path)
        runs_dir = _resolve_path(data.get("runs_dir"), settings, fallback=runs_dir)
        study_defaults = _study_values(data)
    elif config_path is not None:
        raise FileNotFoundError(f"Config file not found: {final_path}")

    return AppConfig(settings=settings, runs_dir=runs_dir, study_defaults=study_defaults)


def build_study_config(config: AppConfig, overrides: Optional[dict[str, Any]] = None) -> StudyConfig:
    """Built-in defaults, then config-file values, then non-None overrides."""
    merged = dict(config.study_defaults)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in STUDY_KEYS:
            raise KeyError(f"Unknown study option: {key}")
        merged[key] = value
    return StudyConfig.model_validate(merged)


def _read_json(path: Path) -> dict[str, Any]:
    return json.loads(path.read_text(encoding="utf-8"))


def _study_values(data: dict[str, Any]) -> dict[str, Any]:
    study = data.get("study", data)
    return {key: value for key, value in study.items() if key in STUDY_KEYS}


def _resolve_path(value: Optional[str], settings: AppSettings, fallback: Path) -> Path:
    if not value:
        return fallback
    path = Path(value)
    if not path.is_absolute():
        path = settings.project_root / path
    return path.expanduser().resolve()
