from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()


def _find_project_root() -> Path:
    env_root = os.getenv("SCMFEM_PROJECT_ROOT")
    if env_root:
        return Path(env_root).expanduser().resolve()
    current = Path(__file__).resolve()
    for parent in current.parents:
        if (parent / "config.json").exists() and (parent / "scmfem").is_dir():
            return parent
    return current.parents[1]


@dataclass(frozen=True)
class AppSettings:
    project_root: Path
    runs_dir: Path
    config_path: Path
    log_level: str
    max_workers: int


def load_settings() -> AppSettings:
    project_root = _find_project_root()

    runs_dir = Path(
        os.getenv("SCMFEM_RUNS_DIR", project_root / "runs")
    ).expanduser().resolve()
    config_path = Path(
        os.getenv("SCMFEM_CONFIG", project_root / "config.json")
    ).expanduser().resolve()

    return AppSettings(
        project_root=project_root,
        runs_dir=runs_dir,
        config_path=config_path,
        log_level=os.getenv("SCMFEM_LOG_LEVEL", "INFO").upper(),
        max_workers=_int_env("SCMFEM_MAX_WORKERS", 2),
    )


def _int_env(name: str, default: int) -> int:
    value = os.getenv(name, "").strip()
    if not value:
        return default
    try:
        return max(1, int(value))
    except ValueError:
        return default
