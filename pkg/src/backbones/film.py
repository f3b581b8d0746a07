"""FiLM layers and the flat FiLM parameter vector ψ.

FilmParams keeps every layer's (γ, β) pair in one flat float64 vector laid out
as [γ_0, β_0, γ_1, β_1, ...]. That single vector is what the optimizer updates,
what the federated transmitter sends and what gets written to disk, so its
length is the FiLM parameter count everywhere.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import torch
from torch import Tensor

from src.core.errors import DimensionMismatch
from src.numerics import DTYPE
from src.utils.blob_io import read_blob, write_blob

QUANTILES = (0.0, 0.25, 0.5, 0.75, 1.0)
QUANTILE_NAMES = ("min", "q1", "median", "q3", "max")


@dataclass
class FilmLayer:
    """Per-channel scale and shift for one placement."""

    gamma: Tensor
    beta: Tensor

    def __post_init__(self) -> None:
        self.gamma = torch.as_tensor(self.gamma, dtype=DTYPE)
        self.beta = torch.as_tensor(self.beta, dtype=DTYPE)
        if self.gamma.ndim != 1 or self.gamma.shape != self.beta.shape:
            raise DimensionMismatch(
                f"gamma {tuple(self.gamma.shape)} and beta {tuple(self.beta.shape)} "
                "must be vectors of equal length"
            )

    @classmethod
    def identity(cls, width: int) -> "FilmLayer":
        return cls(torch.ones(width, dtype=DTYPE), torch.zeros(width, dtype=DTYPE))

    @property
    def width(self) -> int:
        return int(self.gamma.shape[0])


def film(activations: Tensor, layer: FilmLayer) -> Tensor:
    """Apply γ·a + β along the last (channel) axis."""
    activations = torch.as_tensor(activations, dtype=DTYPE)
    if activations.shape[-1] != layer.width:
        raise DimensionMismatch(
            f"Activations have {activations.shape[-1]} channels, FiLM layer has {layer.width}"
        )
    return activations * layer.gamma + layer.beta


class FilmParams:
    """Ordered FiLM layers backed by one flat vector.

    Args:
        widths: Channel count of every FiLM placement, front to back.
        values: Flat vector of length 2·Σ widths. Defaults to the identity
            setting γ = 1, β = 0.
    """

    def __init__(self, widths: Sequence[int], values: Tensor | None = None) -> None:
        self.widths = tuple(int(w) for w in widths)
        if not self.widths or any(w <= 0 for w in self.widths):
            raise DimensionMismatch(f"FiLM widths must be positive, got {list(self.widths)}")

        if values is None:
            values = torch.cat(
                [torch.cat([torch.ones(w, dtype=DTYPE), torch.zeros(w, dtype=DTYPE)])
                 for w in self.widths]
            )
        else:
            values = torch.as_tensor(values, dtype=DTYPE)
        if values.shape != (self.count,):
            raise DimensionMismatch(
                f"FiLM vector must have shape ({self.count},), got {tuple(values.shape)}"
            )
        self.values = values

    @classmethod
    def identity(cls, widths: Sequence[int]) -> "FilmParams":
        return cls(widths)

    @classmethod
    def from_layers(cls, layers: Sequence[FilmLayer]) -> "FilmParams":
        values = torch.cat([torch.cat([layer.gamma, layer.beta]) for layer in layers])
        return cls([layer.width for layer in layers], values)

    @property
    def count(self) -> int:
        """Number of scalar FiLM parameters, 2·Σ widths."""
        return 2 * sum(self.widths)

    def __len__(self) -> int:
        return len(self.widths)

    def offsets(self) -> list[tuple[int, int, int]]:
        """(gamma offset, beta offset, width) for every layer."""
        result = []
        offset = 0
        for width in self.widths:
            result.append((offset, offset + width, width))
            offset += 2 * width
        return result

    def layer(self, index: int) -> FilmLayer:
        """Views into the flat vector, so gradients flow back to `values`."""
        gamma_at, beta_at, width = self.offsets()[index]
        values = self.values
        return FilmLayer(values[gamma_at:gamma_at + width], values[beta_at:beta_at + width])

    def layers(self) -> list[FilmLayer]:
        return [self.layer(i) for i in range(len(self))]

    def with_values(self, values: Tensor) -> "FilmParams":
        return FilmParams(self.widths, values)

    def detach(self) -> "FilmParams":
        """Copy with no autograd history."""
        return FilmParams(self.widths, self.values.detach().clone())

    def equal(self, other: "FilmParams") -> bool:
        return self.widths == other.widths and torch.equal(self.values, other.values)

    def is_identity(self) -> bool:
        return self.equal(FilmParams.identity(self.widths))

    def to_record(self) -> dict[str, Any]:
        return {"widths": list(self.widths), "count": self.count}


def save_film(psi: FilmParams, path: str | Path) -> Path:
    """Write ψ as a flat blob; the sidecar lists each layer's offsets."""
    fields = {}
    for i, layer in enumerate(psi.layers()):
        fields[f"gamma_{i}"] = layer.gamma
        fields[f"beta_{i}"] = layer.beta
    meta = {"kind": "film", "widths": list(psi.widths), "count": psi.count}
    return write_blob(path, fields, meta)


def load_film(path: str | Path) -> FilmParams:
    """Read ψ written by `save_film`."""
    fields, meta = read_blob(path)
    widths = meta["widths"]
    layers = [FilmLayer(fields[f"gamma_{i}"], fields[f"beta_{i}"]) for i in range(len(widths))]
    return FilmParams.from_layers(layers)


def film_magnitude_stats(psi: FilmParams) -> list[dict[str, Any]]:
    """Per-layer box-plot summary of |γ − 1| and |β|.

    Returns:
        One row per FiLM layer in placement order, with keys `layer`, `width`,
        `gamma_<stat>` and `beta_<stat>` for min, q1, median, q3 and max.
    """
    rows = []
    for index, layer in enumerate(psi.detach().layers()):
        gamma_dev = np.abs(layer.gamma.numpy() - 1.0)
        beta_abs = np.abs(layer.beta.numpy())
        row: dict[str, Any] = {"layer": index, "width": layer.width}
        for prefix, values in (("gamma", gamma_dev), ("beta", beta_abs)):
            for name, q in zip(QUANTILE_NAMES, np.quantile(values, QUANTILES)):
                row[f"{prefix}_{name}"] = float(q)
        rows.append(row)
    return rows
