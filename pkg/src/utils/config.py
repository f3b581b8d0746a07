"""Configuration utilities.

Config files may be YAML, JSON or TOML. Each top-level section (`backbone`,
`synth`, `train`, `fed`, `run`, `tracking`) binds to a dataclass through
`build_dataclass`, which rejects unknown keys.
"""

import json
import tomllib
from dataclasses import fields, is_dataclass
from pathlib import Path
from typing import Any, TypeVar, get_origin

import yaml

from src.core.errors import ConfigError

T = TypeVar("T")

CONFIG_SECTIONS = ("backbone", "synth", "train", "fed", "run", "tracking")
TOP_LEVEL_KEYS = ("out_dir", "log_level", "seed", "data", "test")


def load_config(path: str | Path) -> dict[str, Any]:
    """Load configuration from a YAML, JSON or TOML file.

    A run manifest (`manifest.json` written next to every output) is accepted
    too; its embedded `config` is returned so a run can be repeated from it.

    Args:
        path: Path to the configuration file.

    Returns:
        Configuration dictionary.

    Raises:
        FileNotFoundError: If the config file doesn't exist.
        ConfigError: If the file cannot be parsed or is not a mapping.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")

    suffix = path.suffix.lower()
    try:
        if suffix == ".json":
            with open(path, "r", encoding="utf-8") as f:
                config = json.load(f)
        elif suffix == ".toml":
            with open(path, "rb") as f:
                config = tomllib.load(f)
        else:
            with open(path, "r", encoding="utf-8") as f:
                config = yaml.safe_load(f)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"Cannot parse config {path}: {e}") from e

    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ConfigError(f"Config {path} must be a mapping, got {type(config).__name__}")
    if "config_hash" in config and "config" in config:
        return config["config"]
    return config


def save_config(config: dict[str, Any], path: str | Path) -> None:
    """Save configuration to a YAML file.

    Args:
        config: Configuration dictionary.
        path: Path to save the YAML file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with open(path, "w", encoding="utf-8") as f:
        yaml.dump(config, f, default_flow_style=False, sort_keys=True)


def check_sections(config: dict[str, Any]) -> None:
    """Reject unknown top-level keys."""
    allowed = set(CONFIG_SECTIONS) | set(TOP_LEVEL_KEYS)
    unknown = sorted(set(config) - allowed)
    if unknown:
        raise ConfigError(f"Unknown config key(s) {unknown}. Allowed: {sorted(allowed)}")


def build_dataclass(cls: type[T], values: dict[str, Any] | None, section: str) -> T:
    """Bind a config section to a dataclass.

    Lists are converted to tuples for tuple-typed fields. The instance's
    `validate()` runs when defined.

    Raises:
        ConfigError: On unknown keys or invalid values.
    """
    if not is_dataclass(cls):
        raise TypeError(f"{cls!r} is not a dataclass")
    values = dict(values or {})
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"Unknown key(s) in '{section}': {unknown}. Allowed: {sorted(known)}")

    for name, value in values.items():
        if get_origin(known[name].type) is tuple and isinstance(value, list):
            values[name] = tuple(value)

    try:
        obj = cls(**values)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid '{section}' section: {e}") from e

    validate = getattr(obj, "validate", None)
    if callable(validate):
        try:
            validate()
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(f"Invalid '{section}' section: {e}") from e
    return obj


def apply_overrides(config: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Return a copy of config with dotted-key overrides applied.

    `{"train.learning_rate": 0.01}` sets `config["train"]["learning_rate"]`.
    None values are skipped so unset CLI flags keep file values.
    """
    merged = {k: dict(v) if isinstance(v, dict) else v for k, v in config.items()}
    for key, value in overrides.items():
        if value is None:
            continue
        if "." in key:
            section, name = key.split(".", 1)
            merged.setdefault(section, {})[name] = value
        else:
            merged[key] = value
    return merged
