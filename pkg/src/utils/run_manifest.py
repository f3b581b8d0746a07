"""Run manifests: everything needed to repeat a run exactly.

The manifest holds no timestamps, so identical runs write identical bytes.
"""

import hashlib
import json
import subprocess
from importlib import metadata
from pathlib import Path
from typing import Any

import src

TRACKED_PACKAGES = ("torch", "numpy", "scikit-learn", "pyyaml", "mlflow", "joblib", "tqdm")


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(config: dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a resolved config."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def module_versions() -> dict[str, str]:
    versions = {"fit": src.__version__}
    for package in TRACKED_PACKAGES:
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = "missing"
    return versions


def git_describe(cwd: str | Path | None = None) -> str:
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=cwd,
            capture_output=True,
            text=True,
            check=True,
        )
    except (OSError, subprocess.CalledProcessError):
        return "unknown"
    return result.stdout.strip() or "unknown"


def build_run_manifest(
    command: str,
    config: dict[str, Any],
    seed: int,
    spec: dict[str, Any] | None = None,
) -> dict[str, Any]:
    """Describe a run.

    Args:
        command: Subcommand name.
        config: Fully resolved configuration.
        seed: Master seed.
        spec: Backbone/data description the run used.
    """
    return {
        "command": command,
        "seed": seed,
        "config": config,
        "spec": spec or {},
        "module_versions": module_versions(),
        "git_describe": git_describe(),
        "config_hash": config_hash(config),
    }


def save_run_manifest(manifest: dict[str, Any], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
