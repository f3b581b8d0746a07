"""Backbone descriptions and FiLM parameter accounting."""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Protocol

from src.core.errors import ConfigError, ParseError
from src.core.interfaces import BaseBackbone

BACKBONE_KINDS = ("identity-with-film", "mlp-with-film")


class HasFilmWidths(Protocol):
    def film_widths(self) -> list[int]: ...


@dataclass(frozen=True)
class BackboneSpec:
    """Frozen feature extractor description.

    The frozen weights of an MLP backbone are regenerated from `seed`, so the
    spec alone reproduces the network.
    """

    kind: str = "identity-with-film"
    input_dim: int = 16
    hidden_widths: tuple[int, ...] = field(default_factory=tuple)
    output_dim: int | None = None
    final_film: bool = True
    seed: int = 0
    gain: float = math.sqrt(2.0)
    norm_eps: float = 1e-5

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))

    def validate(self) -> None:
        if self.kind not in BACKBONE_KINDS:
            available = list(BACKBONE_KINDS)
            raise ConfigError(f"Unknown backbone kind '{self.kind}'. Available: {available}")
        if self.input_dim <= 0:
            raise ConfigError(f"input_dim must be positive, got {self.input_dim}")
        if any(w <= 0 for w in self.hidden_widths):
            raise ConfigError(f"hidden_widths must be positive, got {list(self.hidden_widths)}")
        if self.output_dim is not None and self.output_dim <= 0:
            raise ConfigError(f"output_dim must be positive, got {self.output_dim}")
        if self.kind == "identity-with-film":
            if self.hidden_widths:
                raise ConfigError("identity-with-film takes no hidden_widths")
            if self.output_dim not in (None, self.input_dim):
                raise ConfigError("identity-with-film output_dim must equal input_dim")
            if not self.final_film:
                raise ConfigError("identity-with-film needs its FiLM layer")
        if self.norm_eps <= 0:
            raise ConfigError(f"norm_eps must be positive, got {self.norm_eps}")

    @property
    def embedding_dim(self) -> int:
        """d_b."""
        return self.input_dim if self.output_dim is None else self.output_dim

    def film_widths(self) -> list[int]:
        """Channel counts at FiLM placements: every hidden layer, then the output."""
        widths = list(self.hidden_widths) if self.kind == "mlp-with-film" else []
        if self.final_film:
            widths.append(self.embedding_dim)
        return widths

    def build(self) -> BaseBackbone:
        """Instantiate the registered backbone for this spec."""
        import src.backbones  # noqa: F401  (registers backbone kinds)
        from src.core.factories import BackboneFactory

        self.validate()
        return BackboneFactory.create(self.kind, self)

    def to_dict(self) -> dict[str, Any]:
        record = asdict(self)
        record["hidden_widths"] = list(self.hidden_widths)
        record["output_dim"] = self.embedding_dim
        return record

    @classmethod
    def from_dict(cls, record: dict[str, Any]) -> "BackboneSpec":
        from src.utils.config import build_dataclass

        return build_dataclass(cls, record, section="backbone")


def as_backbone(backbone: "BaseBackbone | BackboneSpec") -> BaseBackbone:
    """Accept either a built backbone or its spec."""
    return backbone.build() if isinstance(backbone, BackboneSpec) else backbone


def save_backbone_spec(spec: BackboneSpec, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def read_backbone_record(path: str | Path) -> dict[str, Any]:
    """Raw backbone section from a spec JSON file, not yet validated.

    Raises:
        FileNotFoundError: If the file doesn't exist.
        ParseError: If the file is not valid JSON (row and column of the fault).
        ConfigError: If the JSON is not an object.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Backbone spec not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            record = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: {e.msg}", e.lineno, e.colno) from None
    if not isinstance(record, dict):
        raise ConfigError(f"Backbone spec must be a JSON object: {path}")
    return record


def load_backbone_spec(path: str | Path) -> BackboneSpec:
    return BackboneSpec.from_dict(read_backbone_record(path))


@dataclass(frozen=True)
class ReferenceLayout:
    """FiLM placement of a large published backbone, for accounting only.

    One FiLM layer follows the middle convolution of every residual block and
    one more sits on the final embedding.
    """

    name: str
    blocks: tuple[int, ...]
    middle_widths: tuple[int, ...]
    final_width: int
    backbone_params: int

    def film_widths(self) -> list[int]:
        widths = [w for count, w in zip(self.blocks, self.middle_widths) for _ in range(count)]
        return widths + [self.final_width]


RESNET50_BACKBONE_PARAMS = 23_500_352

RESNET50_FILM_LAYOUT = ReferenceLayout(
    name="resnet50-v2",
    blocks=(3, 4, 6, 3),
    middle_widths=(64, 128, 256, 512),
    final_width=2048,
    backbone_params=RESNET50_BACKBONE_PARAMS,
)


def film_param_count(spec: HasFilmWidths) -> int:
    """2·Σ channel widths at FiLM placements."""
    return 2 * sum(spec.film_widths())
