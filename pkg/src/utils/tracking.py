"""Optional MLflow experiment tracking.

Disabled trackers accept every call and do nothing, so library code can log
unconditionally.
"""

import logging
from pathlib import Path
from typing import Any

import mlflow

logger = logging.getLogger(__name__)


def flatten_params(config: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    """Flatten nested config sections into dotted MLflow parameter names."""
    flat: dict[str, Any] = {}
    for key, value in config.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten_params(value, prefix=f"{name}."))
        else:
            flat[name] = value
    return flat


class RunTracker:
    """Context manager around an MLflow run."""

    def __init__(
        self,
        enabled: bool = False,
        experiment: str = "fit",
        run_name: str | None = None,
    ) -> None:
        self.enabled = enabled
        self.experiment = experiment
        self.run_name = run_name

    def __enter__(self) -> "RunTracker":
        if self.enabled:
            mlflow.set_experiment(self.experiment)
            mlflow.start_run(run_name=self.run_name, nested=True)
            logger.info(f"MLflow tracking to experiment '{self.experiment}'")
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if self.enabled:
            mlflow.end_run(status="FAILED" if exc_type else "FINISHED")

    def log_params(self, params: dict[str, Any]) -> None:
        if self.enabled:
            mlflow.log_params(flatten_params(params))

    def log_metrics(self, metrics: dict[str, float], step: int | None = None) -> None:
        if self.enabled:
            mlflow.log_metrics({k: float(v) for k, v in metrics.items()}, step=step)

    def log_artifact(self, path: str | Path) -> None:
        if self.enabled:
            mlflow.log_artifact(str(path))

    def log_dict(self, data: dict[str, Any], name: str) -> None:
        if self.enabled:
            mlflow.log_dict(data, name)


NULL_TRACKER = RunTracker(enabled=False)
