"""Logging setup for entry points."""

import logging
import os

LOG_ENV_VAR = "FIT_LOG"
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


def resolve_log_level(flag: str | None = None) -> int:
    """Flag beats the FIT_LOG environment variable, which beats INFO."""
    name = flag or os.environ.get(LOG_ENV_VAR) or "INFO"
    level = logging.getLevelName(name.upper())
    if not isinstance(level, int):
        raise ValueError(f"Unknown log level '{name}'")
    return level


def setup_logging(level: str | None = None) -> None:
    logging.basicConfig(level=resolve_log_level(level), format=LOG_FORMAT, force=True)
