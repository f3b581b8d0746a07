"""Shared plumbing for the `fit` subcommands.

A step receives the fully resolved configuration (file values with CLI flags
applied). It writes `config.yaml` and `manifest.json` into its output
directory next to its own artifacts, so every output directory can be rerun
with `fit <command> --config <out_dir>/manifest.json`.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, TypeVar

from src.backbones.spec import RESNET50_BACKBONE_PARAMS, BackboneSpec
from src.core.errors import ConfigError, DimensionMismatch
from src.core.interfaces import PipelineStep
from src.data.dataset import LabelledDataset, load_csv
from src.data.synth import SynthResult, SynthSpec, generate_synth
from src.utils.config import build_dataclass, check_sections, save_config
from src.utils.run_manifest import build_run_manifest, save_run_manifest
from src.utils.tracking import RunTracker

logger = logging.getLogger(__name__)

T = TypeVar("T")

VARIANTS = ("qda", "lda", "protonets", "linear")
SEEDED_SECTIONS = ("synth", "train", "fed")


@dataclass(frozen=True)
class RunOptions:
    """Subcommand switches that belong to no library config.

    `variant` 'linear' trains the linear-head baseline instead of a Naive
    Bayes head. `num_seeds` > 1 repeats a federated run with seeds
    fed.seed, fed.seed + 1, ... The `*_path` entries point `eval` at
    previously written blobs. The ledger entries size the cost-only report of
    `fedsim`; `psi_count` defaults to the configured backbone's ψ, or to the
    ResNet-50 reference layout when no backbone is configured.
    """

    variant: str = "lda"
    shots: int | None = None
    compact_lda: bool = True
    train_film: bool = True
    ladder: bool = False
    num_seeds: int = 1
    film_path: str | None = None
    weights_path: str | None = None
    cache_path: str | None = None
    ledger_only: bool = False
    psi_count: int | None = None
    reference_classes: int = 100
    embedding_dim: int = 2048
    backbone_params: int = RESNET50_BACKBONE_PARAMS

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"Unknown variant '{self.variant}'. Available: {list(VARIANTS)}")
        if self.shots is not None and self.shots < 1:
            raise ConfigError(f"shots must be positive, got {self.shots}")
        if self.num_seeds < 1:
            raise ConfigError(f"num_seeds must be at least 1, got {self.num_seeds}")
        for name in ("psi_count", "reference_classes", "embedding_dim", "backbone_params"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class TrackingConfig:
    mlflow: bool = False
    experiment: str = "fit"


def resolve_config(config: dict[str, Any]) -> dict[str, Any]:
    """Validate top-level keys and hand the top-level seed to seeded sections.

    A section's own `seed` wins over the top-level one.
    """
    check_sections(config)
    resolved = {k: dict(v) if isinstance(v, dict) else v for k, v in config.items()}
    if resolved.get("seed") is not None:
        for section in SEEDED_SECTIONS:
            resolved.setdefault(section, {}).setdefault("seed", int(resolved["seed"]))
    return resolved


class RunStep(PipelineStep):
    """Base for subcommands that write an output directory."""

    def __init__(self, config: dict[str, Any] | None = None) -> None:
        super().__init__(resolve_config(config or {}))
        self.out_dir = Path(self.config.get("out_dir") or "runs")
        self.options = self.section(RunOptions, "run")
        self.tracking = self.section(TrackingConfig, "tracking")

    def section(self, cls: type[T], name: str) -> T:
        return build_dataclass(cls, self.config.get(name), name)

    def path_option(self, key: str) -> Path | None:
        value = self.config.get(key)
        return Path(value) if value else None

    def tracker(self) -> RunTracker:
        return RunTracker(
            enabled=self.tracking.mlflow,
            experiment=self.tracking.experiment,
            run_name=f"{self.name}-{self.out_dir.name}",
        )

    def validate(self) -> bool:
        for key in ("data", "test"):
            path = self.path_option(key)
            if path is not None and not path.exists():
                logger.error(f"Input not found: {path}")
                return False
        return True

    def load_datasets(
        self,
    ) -> tuple[LabelledDataset, LabelledDataset | None, SynthResult | None]:
        """Read `data`/`test` CSVs, or generate the synthetic benchmark when no
        data path is configured."""
        data_path = self.path_option("data")
        if data_path is None:
            synth = generate_synth(self.section(SynthSpec, "synth"))
            return synth.train, synth.test, synth
        test_path = self.path_option("test")
        test = load_csv(test_path) if test_path is not None else None
        return load_csv(data_path), test, None

    def backbone_spec(self, input_dim: int) -> BackboneSpec:
        """The configured backbone, or identity-with-film sized to the data."""
        values = self.config.get("backbone")
        if not values:
            return BackboneSpec(kind="identity-with-film", input_dim=input_dim)
        spec = self.section(BackboneSpec, "backbone")
        if spec.input_dim != input_dim:
            raise DimensionMismatch(
                f"Backbone expects inputs of dimension {spec.input_dim}, data has {input_dim}"
            )
        return spec

    def write_run_files(self, seed: int, spec: dict[str, Any] | None = None) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        save_config(self.config, self.out_dir / "config.yaml")
        manifest = build_run_manifest(self.name, self.config, seed, spec)
        save_run_manifest(manifest, self.out_dir / "manifest.json")


def write_json(data: dict[str, Any], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path
