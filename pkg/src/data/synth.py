"""Synthetic benchmark with a per-channel affine domain shift.

Latent points z are drawn from isotropic class Gaussians whose means sit on a
scaled, centered simplex. Observations are x_j = s_j·z_j + t_j with one
(s, t) shared by all classes. The FiLM setting γ = 1/s, β = -t/s on an
identity-with-film backbone maps observations back to the latent space.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from src.backbones.film import FilmParams
from src.core.errors import ConfigError
from src.numerics import DTYPE

from .dataset import LabelledDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthSpec:
    """Synthetic dataset description.

    `distortion_scale` k draws s_j log-uniformly from [1/k, k] and t_j
    uniformly from [-(k-1), k-1], so k = 1 means no distortion. Explicit
    `scales`/`shifts` (one per latent channel) override the random draw.
    """

    num_classes: int = 10
    latent_dim: int = 32
    separation: float = 3.0
    class_std: float = 1.0
    distortion_scale: float = 5.0
    train_shots: int = 10
    test_shots: int = 50
    seed: int = 0
    scales: tuple[float, ...] = field(default_factory=tuple)
    shifts: tuple[float, ...] = field(default_factory=tuple)

    def validate(self) -> None:
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be at least 2, got {self.num_classes}")
        for name in ("latent_dim", "train_shots", "test_shots"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.separation <= 0 or self.class_std <= 0:
            raise ConfigError("separation and class_std must be positive")
        if self.distortion_scale < 1:
            raise ConfigError(f"distortion_scale must be >= 1, got {self.distortion_scale}")
        for name in ("scales", "shifts"):
            values = getattr(self, name)
            if values and len(values) != self.latent_dim:
                raise ConfigError(f"{name} needs {self.latent_dim} entries, got {len(values)}")
        if any(s == 0 for s in self.scales):
            raise ConfigError("Distortion scales must be nonzero")


@dataclass
class SynthResult:
    train: LabelledDataset
    test: LabelledDataset
    oracle_film: FilmParams
    train_latent: torch.Tensor
    test_latent: torch.Tensor
    scales: np.ndarray
    shifts: np.ndarray


def class_means(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """(C, latent_dim) latent class means."""
    c, d = spec.num_classes, spec.latent_dim
    if d >= c:
        means = np.zeros((c, d))
        means[:, :c] = np.eye(c) - 1.0 / c
        return spec.separation * means
    directions = rng.standard_normal((c, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return spec.separation * directions


def _draw(
    spec: SynthSpec, means: np.ndarray, shots: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    labels = np.repeat(np.arange(spec.num_classes), shots)
    latent = means[labels] + spec.class_std * rng.standard_normal((labels.size, spec.latent_dim))
    order = rng.permutation(labels.size)
    return latent[order], labels[order]


def generate_synth(spec: SynthSpec) -> SynthResult:
    """Draw train/test sets and the oracle FiLM that undoes the distortion."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)

    means = class_means(spec, rng)
    k = spec.distortion_scale
    if spec.scales:
        scales = np.asarray(spec.scales, dtype=np.float64)
    else:
        scales = np.exp(rng.uniform(-math.log(k), math.log(k), spec.latent_dim))
    if spec.shifts:
        shifts = np.asarray(spec.shifts, dtype=np.float64)
    else:
        shifts = rng.uniform(-(k - 1.0), k - 1.0, spec.latent_dim)

    train_latent, train_labels = _draw(spec, means, spec.train_shots, rng)
    test_latent, test_labels = _draw(spec, means, spec.test_shots, rng)

    train = LabelledDataset(scales * train_latent + shifts, train_labels, spec.num_classes)
    test = LabelledDataset(scales * test_latent + shifts, test_labels, spec.num_classes)
    oracle = FilmParams(
        [spec.latent_dim],
        torch.as_tensor(np.concatenate([1.0 / scales, -shifts / scales]), dtype=DTYPE),
    )
    logger.info(
        f"Generated synthetic data: {spec.num_classes} classes, {len(train)} train / "
        f"{len(test)} test examples, distortion scale {k}"
    )
    return SynthResult(
        train=train,
        test=test,
        oracle_film=oracle,
        train_latent=torch.as_tensor(train_latent, dtype=DTYPE),
        test_latent=torch.as_tensor(test_latent, dtype=DTYPE),
        scales=scales,
        shifts=shifts,
    )
