"""Environment defaults and JSON run-configuration loading."""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Any

from dotenv import load_dotenv

load_dotenv()

VERSION = "0.3.0"

_FALSE_WORDS = {"0", "false", "off", "no"}


def _env_flag(name: str, default: str = "1") -> bool:
    return os.getenv(name, default).strip().lower() not in _FALSE_WORDS


OUTPUT_DIR = Path(os.getenv("UNROLL_OUTPUT_DIR", "results"))
WORKERS = int(os.getenv("UNROLL_WORKERS", "1"))
LOG_LEVEL = os.getenv("UNROLL_LOG_LEVEL", "INFO").strip().upper()
MASTER_SEED = int(os.getenv("UNROLL_MASTER_SEED", "0"))
DEFAULT_CLIP_OUTPUT = _env_flag("UNROLL_CLIP_OUTPUT")
RUN_SLOW = _env_flag("UNROLL_RUN_SLOW", "0")
PORT = int(os.getenv("PORT", "5000"))
FLASK_DEBUG = _env_flag("FLASK_DEBUG", "0")


def configure_logging(level: str | None = None) -> None:
    logging.basicConfig(
        level=(level or LOG_LEVEL),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def load_config(path) -> dict[str, Any]:
    """Load a JSON run configuration into a plain dict."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")

    content = path.read_text(encoding="utf-8")
    if not content.strip():
        raise ValueError(f"Config file is empty: {path}")
    try:
        data = json.loads(content)
    except json.JSONDecodeError as e:
        raise ValueError(f"Invalid JSON in {path}: {e}")

    if not isinstance(data, dict):
        raise ValueError(f"Config {path} must contain a JSON object at the top level")
    return data


def reject_unknown_keys(data: dict[str, Any], allowed, where: str) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ValueError(f"Unknown keys in {where}: {', '.join(unknown)}")
