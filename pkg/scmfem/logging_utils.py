from __future__ import annotations

import json
import logging
import os
from datetime import datetime, timezone
from typing import Any

import numpy as np


def setup_logging() -> logging.Logger:
    logger = logging.getLogger("scmfem")
    if logger.handlers:
        return logger
    level_name = os.getenv("SCMFEM_LOG_LEVEL", "INFO").upper()
    level = getattr(logging, level_name, logging.INFO)
    logging.basicConfig(level=level, format="%(message)s")
    return logger


def log_event(logger: logging.Logger, event: str, **fields: Any) -> None:
    ts = datetime.now(timezone.utc).replace(tzinfo=None).isoformat() + "Z"
    payload = {"event": event, "ts": ts, **fields}
    logger.info(json.dumps(payload, ensure_ascii=False, default=_jsonable))


def _jsonable(value: Any) -> Any:
    """numpy scalars and arrays; anything else is a caller bug."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")
