"""Linear classification head, the baseline the Naive Bayes head is compared with."""

from dataclasses import dataclass
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import Tensor

from src.core.errors import DimensionMismatch
from src.numerics import DTYPE
from src.utils.blob_io import read_blob, write_blob


@dataclass
class LinearHead:
    """logits = W·b(x) + bias with W of shape (C, d_b)."""

    weight: Tensor
    bias: Tensor

    def __post_init__(self) -> None:
        self.weight = torch.as_tensor(self.weight, dtype=DTYPE)
        self.bias = torch.as_tensor(self.bias, dtype=DTYPE)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise DimensionMismatch(
                f"Weight {tuple(self.weight.shape)} and bias {tuple(self.bias.shape)} "
                "do not conform"
            )
        if not bool(torch.isfinite(self.weight).all() and torch.isfinite(self.bias).all()):
            raise ValueError("Linear head entries must be finite")

    @classmethod
    def zeros(cls, num_classes: int, dim: int) -> "LinearHead":
        weight = torch.zeros(num_classes, dim, dtype=DTYPE)
        return cls(weight, torch.zeros(num_classes, dtype=DTYPE))

    @property
    def num_classes(self) -> int:
        return int(self.weight.shape[0])

    @property
    def dim(self) -> int:
        return int(self.weight.shape[1])

    def detach(self) -> "LinearHead":
        return LinearHead(self.weight.detach().clone(), self.bias.detach().clone())


def linear_forward(head: LinearHead, embeddings: Tensor) -> Tensor:
    """Logits for (d,) or (N, d) embeddings."""
    x = torch.as_tensor(embeddings, dtype=DTYPE)
    if x.shape[-1] != head.dim:
        raise DimensionMismatch(f"Embedding dimension {x.shape[-1]} but head expects {head.dim}")
    return F.linear(x, head.weight, head.bias)


def linear_loss(head: LinearHead, embeddings: Tensor, labels: Tensor | int) -> Tensor:
    """Mean cross-entropy, -log softmax(logits)[label]."""
    logits = linear_forward(head, embeddings)
    labels = torch.as_tensor(labels, dtype=torch.long)
    if logits.ndim == 1:
        logits, labels = logits.unsqueeze(0), labels.reshape(1)
    if labels.shape != (logits.shape[0],):
        raise DimensionMismatch(f"{logits.shape[0]} embeddings but {labels.numel()} labels")
    return F.cross_entropy(logits, labels)


def save_linear_head(head: LinearHead, path: str | Path) -> Path:
    meta = {"kind": "linear_head", "num_classes": head.num_classes, "dim": head.dim}
    return write_blob(path, {"weight": head.weight, "bias": head.bias}, meta)


def load_linear_head(path: str | Path) -> LinearHead:
    fields, _ = read_blob(path)
    return LinearHead(torch.from_numpy(fields["weight"]), torch.from_numpy(fields["bias"]))
