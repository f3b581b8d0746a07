"""Gaussian Naive Bayes head: prediction-ready caches and posteriors.

A ClassifierCache holds only what prediction needs:

- QDA: per-class Cholesky factors, log-determinants, means and log-priors.
- LDA (compact): v_c = Σ⁻¹μ_c and s_c = μ_cᵀΣ⁻¹μ_c per class plus log-priors.
  The test-point term xᵀΣ⁻¹x is shared by every class and cancels in the
  posterior, so it is not stored.
- LDA (full form): one shared Cholesky factor, means and log-priors.
- ProtoNets: means only; logits are -‖x - μ_c‖².
"""

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Sequence

import torch
from torch import Tensor

from src.core.errors import DimensionMismatch
from src.numerics import (
    DTYPE,
    CholeskyFactor,
    chol_logdet,
    chol_solve,
    cholesky,
    squared_distance,
    tri_solve,
)
from src.utils.blob_io import read_blob, write_blob

from .statistics import CovarianceWeights, HeadStatistics, HeadVariant, mix_covariance

logger = logging.getLogger(__name__)

_BLOB_FIELDS = ("means", "log_priors", "factors", "log_dets", "lda_vectors", "lda_scalars")


@dataclass(frozen=True)
class ClassifierCache:
    """Prediction-ready head for C classes."""

    variant: HeadVariant
    means: Tensor
    log_priors: Tensor
    classes: tuple[int, ...]
    factors: Tensor | None = None
    log_dets: Tensor | None = None
    lda_vectors: Tensor | None = None
    lda_scalars: Tensor | None = None
    use_prior: bool = False

    @property
    def num_classes(self) -> int:
        return int(self.means.shape[0])

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    @property
    def compact(self) -> bool:
        return self.lda_vectors is not None

    def detach(self) -> "ClassifierCache":
        updates = {
            name: getattr(self, name).detach()
            for name in _BLOB_FIELDS
            if getattr(self, name) is not None
        }
        return replace(self, **updates)


def compress_lda(
    stats: HeadStatistics,
    sigma_lda: Tensor,
    classes: Sequence[int] | None = None,
) -> ClassifierCache:
    """Compact LDA cache: C·(d_b + 1) values plus log-priors.

    Raises:
        NotPositiveDefinite: If sigma_lda cannot be factored.
    """
    factor = cholesky(sigma_lda)
    vectors = chol_solve(factor, stats.means.T).T
    scalars = (stats.means * vectors).sum(dim=-1)
    return ClassifierCache(
        variant=HeadVariant.LDA,
        means=stats.means,
        log_priors=torch.log(stats.priors),
        classes=tuple(classes) if classes is not None else tuple(range(stats.num_classes)),
        lda_vectors=vectors,
        lda_scalars=scalars,
    )


def build_cache(
    stats: HeadStatistics,
    weights: CovarianceWeights | None,
    variant: HeadVariant | str,
    compact_lda: bool = True,
    use_prior: bool = False,
    classes: Sequence[int] | None = None,
) -> ClassifierCache:
    """Configure the head from statistics and shrinkage weights.

    Args:
        stats: Support-set statistics.
        weights: Shrinkage weights (ignored for ProtoNets).
        variant: QDA, LDA or ProtoNets.
        compact_lda: Use the compact LDA form; False keeps the shared factor.
        use_prior: ProtoNets only, add log π_c to the distance logits.
        classes: Label of each cache row (defaults to 0..C-1).

    Raises:
        NotPositiveDefinite: If a mixed covariance cannot be factored.
    """
    variant = HeadVariant.parse(variant)
    class_ids = tuple(classes) if classes is not None else tuple(range(stats.num_classes))
    log_priors = torch.log(stats.priors)

    if variant is HeadVariant.PROTONETS:
        return ClassifierCache(
            variant=variant,
            means=stats.means,
            log_priors=log_priors,
            classes=class_ids,
            use_prior=use_prior,
        )

    if weights is None:
        raise ValueError(f"{variant.value} head needs covariance weights")
    sigma = mix_covariance(stats, weights, variant)

    if variant is HeadVariant.LDA and compact_lda:
        return compress_lda(stats, sigma, class_ids)

    factor = cholesky(sigma)
    return ClassifierCache(
        variant=variant,
        means=stats.means,
        log_priors=log_priors,
        classes=class_ids,
        factors=factor.lower,
        log_dets=chol_logdet(factor) if variant is HeadVariant.QDA else None,
    )


def class_logits(embeddings: Tensor, cache: ClassifierCache) -> Tensor:
    """Unnormalized class scores (N, C); terms shared by all classes are dropped."""
    x = torch.as_tensor(embeddings, dtype=DTYPE)
    if x.shape[-1] != cache.dim:
        raise DimensionMismatch(f"Embedding dimension {x.shape[-1]} but head expects {cache.dim}")

    if cache.variant is HeadVariant.PROTONETS:
        logits = -squared_distance(x, cache.means)
        return logits + cache.log_priors if cache.use_prior else logits

    if cache.compact:
        return x @ cache.lda_vectors.T - 0.5 * cache.lda_scalars + cache.log_priors

    # (C, d, N): one column per point, one slab per class
    diff = (x.unsqueeze(0) - cache.means.unsqueeze(1)).transpose(-1, -2)
    whitened = tri_solve(CholeskyFactor(cache.factors), diff)
    mahalanobis = (whitened * whitened).sum(dim=-2).T
    logits = cache.log_priors - 0.5 * mahalanobis
    if cache.log_dets is not None:
        logits = logits - 0.5 * cache.log_dets
    return logits


def predict_log_probs(embedding: Tensor, cache: ClassifierCache) -> Tensor:
    """Log posterior over the cache's classes for one (d,) or many (N, d) embeddings."""
    x = torch.as_tensor(embedding, dtype=DTYPE)
    single = x.ndim == 1
    logits = class_logits(x.unsqueeze(0) if single else x, cache)
    log_probs = torch.log_softmax(logits, dim=-1)
    return log_probs[0] if single else log_probs


def predict_log_joint(embeddings: Tensor, cache: ClassifierCache) -> Tensor:
    """Full log π_c·N(x | μ_c, Σ_c) for QDA and full-form LDA caches, (N, C)."""
    if cache.factors is None:
        raise ValueError("Log-joint densities need a cache that keeps its Cholesky factors")
    x = torch.as_tensor(embeddings, dtype=DTYPE)
    factor = CholeskyFactor(cache.factors)
    logits = class_logits(x, cache)
    if cache.log_dets is None:
        logits = logits - 0.5 * chol_logdet(factor)
    return logits - 0.5 * cache.dim * math.log(2.0 * math.pi)


def predict_labels(embeddings: Tensor, cache: ClassifierCache) -> Tensor:
    """Argmax class label; ties go to the lowest cache row."""
    rows = torch.argmax(class_logits(embeddings, cache), dim=-1)
    return torch.as_tensor(cache.classes, dtype=torch.long)[rows]


def restrict_cache(cache: ClassifierCache, class_ids: Sequence[int]) -> ClassifierCache:
    """Keep only the given classes and renormalize the priors over them."""
    positions = {c: i for i, c in enumerate(cache.classes)}
    missing = [c for c in class_ids if c not in positions]
    if missing:
        raise DimensionMismatch(f"Cache has no class(es) {missing}")
    index = torch.tensor([positions[c] for c in class_ids], dtype=torch.long)

    updates: dict[str, Any] = {"classes": tuple(class_ids)}
    for name in _BLOB_FIELDS:
        value = getattr(cache, name)
        if value is None:
            continue
        if name == "factors" and value.ndim == 2:
            continue
        updates[name] = value[index]
    log_priors = updates["log_priors"]
    updates["log_priors"] = log_priors - torch.logsumexp(log_priors, dim=0)
    return replace(cache, **updates)


def head_parameter_count(cache: ClassifierCache) -> int:
    """Updateable head values held by the cache (excluding e and priors)."""
    c, d = cache.num_classes, cache.dim
    if cache.variant is HeadVariant.QDA:
        return c * d + c * d * (d + 1) // 2
    if cache.variant is HeadVariant.LDA:
        return c * (d + 1) if cache.compact else c * d + d * (d + 1) // 2
    return c * d


def save_cache(cache: ClassifierCache, path: str | Path) -> Path:
    fields = {
        name: getattr(cache, name) for name in _BLOB_FIELDS if getattr(cache, name) is not None
    }
    meta = {
        "kind": "classifier_cache",
        "variant": cache.variant.value,
        "num_classes": cache.num_classes,
        "dim": cache.dim,
        "classes": list(cache.classes),
        "use_prior": cache.use_prior,
    }
    return write_blob(path, fields, meta)


def load_cache(path: str | Path) -> ClassifierCache:
    fields, meta = read_blob(path)
    tensors = {name: torch.from_numpy(fields[name]) for name in _BLOB_FIELDS if name in fields}
    return ClassifierCache(
        variant=HeadVariant.parse(meta["variant"]),
        classes=tuple(meta["classes"]),
        use_prior=bool(meta.get("use_prior", False)),
        **tensors,
    )
