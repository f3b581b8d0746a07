"""Maximum-likelihood Gaussian statistics and covariance shrinkage.

Covariances use the biased 1/N estimator. The task covariance treats all
embeddings as draws from one Gaussian around the global mean.
"""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import Tensor

from src.core.errors import ConfigError, DimensionMismatch, EmptyClass
from src.numerics import DTYPE
from src.utils.blob_io import read_blob, write_blob


class HeadVariant(str, Enum):
    """Covariance choice of the Naive Bayes head."""

    QDA = "qda"
    LDA = "lda"
    PROTONETS = "protonets"

    @classmethod
    def parse(cls, value: "str | HeadVariant") -> "HeadVariant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            available = [v.value for v in cls]
            raise ConfigError(f"Unknown head variant '{value}'. Available: {available}") from None

    @property
    def num_weights(self) -> int:
        """How many of e = (e1, e2, e3) the variant uses."""
        return {HeadVariant.QDA: 3, HeadVariant.LDA: 2, HeadVariant.PROTONETS: 0}[self]


@dataclass(frozen=True)
class HeadStatistics:
    """π, μ, Σ_class, Σ_task and counts estimated from one labelled set."""

    priors: Tensor
    means: Tensor
    class_covariances: Tensor
    task_covariance: Tensor
    counts: Tensor
    total: int

    @property
    def num_classes(self) -> int:
        return int(self.means.shape[0])

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])


def estimate_stats(embeddings: Tensor, labels: Tensor, num_classes: int) -> HeadStatistics:
    """Estimate head statistics.

    Args:
        embeddings: (N, d_b) embeddings.
        labels: (N,) class indices in [0, num_classes).
        num_classes: C.

    Returns:
        HeadStatistics.

    Raises:
        EmptyClass: If some class has zero examples.
        DimensionMismatch: If shapes disagree or a label is out of range.
    """
    embeddings = torch.as_tensor(embeddings, dtype=DTYPE)
    labels = torch.as_tensor(labels, dtype=torch.long)
    if embeddings.ndim != 2:
        raise DimensionMismatch(f"Embeddings must be (N, d), got {tuple(embeddings.shape)}")
    if labels.shape != (embeddings.shape[0],):
        raise DimensionMismatch(
            f"{embeddings.shape[0]} embeddings but labels have shape {tuple(labels.shape)}"
        )
    if labels.numel() and (int(labels.min()) < 0 or int(labels.max()) >= num_classes):
        raise DimensionMismatch(f"Labels must lie in [0, {num_classes})")

    counts = torch.bincount(labels, minlength=num_classes)
    empty = torch.nonzero(counts == 0).flatten().tolist()
    if empty:
        raise EmptyClass(empty[0])

    one_hot = F.one_hot(labels, num_classes).to(DTYPE)
    counts_f = counts.to(DTYPE)
    means = (one_hot.T @ embeddings) / counts_f.unsqueeze(1)

    covariances = []
    for c in range(num_classes):
        centered = embeddings[labels == c] - means[c]
        covariances.append(centered.T @ centered / counts_f[c])
    class_covariances = torch.stack(covariances)

    total = int(labels.shape[0])
    centered = embeddings - embeddings.mean(dim=0)
    task_covariance = centered.T @ centered / total

    return HeadStatistics(
        priors=counts_f / total,
        means=means,
        class_covariances=class_covariances,
        task_covariance=task_covariance,
        counts=counts,
        total=total,
    )


@dataclass
class CovarianceWeights:
    """Shrinkage weights e = (e1, e2, e3) stored as unconstrained logs."""

    log_values: Tensor

    INITIAL = (0.5, 0.5, 1.0)

    def __post_init__(self) -> None:
        self.log_values = torch.as_tensor(self.log_values, dtype=DTYPE)
        if self.log_values.shape != (3,):
            raise DimensionMismatch(f"Expected 3 log-weights, got {tuple(self.log_values.shape)}")

    @classmethod
    def initial(cls) -> "CovarianceWeights":
        return cls.from_values(*cls.INITIAL)

    @classmethod
    def from_values(cls, e1: float, e2: float, e3: float) -> "CovarianceWeights":
        """Build from positive values; 0 maps to log 0 = -inf and back to exactly 0."""
        values = torch.tensor([e1, e2, e3], dtype=DTYPE)
        if bool((values < 0).any()):
            raise ValueError(f"Covariance weights must be nonnegative, got {values.tolist()}")
        return cls(torch.log(values))

    @property
    def values(self) -> Tensor:
        return torch.exp(self.log_values)

    def as_tuple(self) -> tuple[float, float, float]:
        e1, e2, e3 = self.values.detach().tolist()
        return (e1, e2, e3)

    def detach(self) -> "CovarianceWeights":
        return CovarianceWeights(self.log_values.detach().clone())

    def equal(self, other: "CovarianceWeights") -> bool:
        return torch.equal(self.log_values, other.log_values)


def mix_covariance(
    stats: HeadStatistics,
    weights: CovarianceWeights,
    variant: HeadVariant | str,
) -> Tensor | None:
    """Combine statistics into the variant's covariance.

    Returns:
        QDA: (C, d, d) e1·Σ_class + e2·Σ_task + e3·I.
        LDA: (d, d) e2·Σ_task + e3·I.
        ProtoNets: None (identity covariance, nothing stored).
    """
    variant = HeadVariant.parse(variant)
    if variant is HeadVariant.PROTONETS:
        return None

    e1, e2, e3 = weights.values.unbind()
    eye = torch.eye(stats.dim, dtype=DTYPE)
    shared = e2 * stats.task_covariance + e3 * eye
    if variant is HeadVariant.LDA:
        return shared
    return e1 * stats.class_covariances + shared


def save_covariance_weights(weights: CovarianceWeights, path: str | Path) -> Path:
    """Store log e exactly; the sidecar also shows e for inspection."""
    meta = {"kind": "covariance_weights", "values": list(weights.as_tuple())}
    return write_blob(path, {"log_e": weights.log_values}, meta)


def load_covariance_weights(path: str | Path) -> CovarianceWeights:
    fields, _ = read_blob(path)
    return CovarianceWeights(torch.from_numpy(fields["log_e"]))
