"""Episodic fine-tuning of FiLM parameters and covariance weights.

Every iteration samples one task, configures the Naive Bayes head from the
support set under the current ψ and e, and takes a single Adam ascent step on
the summed query log-likelihood. Datasets whose classes all hold a single
example are not trained: the initial parameters are returned unchanged.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
import torch
from torch import Tensor
from tqdm import tqdm

from src.backbones.film import FilmParams
from src.backbones.spec import BackboneSpec, as_backbone
from src.core.errors import ConfigError, EmptyClass, EmptyDataset, FitError, TrainingError
from src.core.interfaces import BaseBackbone
from src.data.dataset import LabelledDataset
from src.heads.naive_bayes import ClassifierCache, build_cache, predict_labels, predict_log_probs
from src.heads.statistics import CovarianceWeights, HeadVariant, estimate_stats
from src.numerics import DTYPE, DiffProgram, gradient
from src.utils.tracking import NULL_TRACKER, RunTracker

from .sampling import Task, full_task, sample_task, split_dataset

logger = logging.getLogger(__name__)

SPLIT_MODES = ("auto", "split", "no-split", "use-all")


@dataclass(frozen=True)
class TrainConfig:
    """Episodic fine-tuning settings.

    `split_mode` 'auto' resolves to 'no-split' when the dataset holds at least
    `no_split_threshold` examples and to 'split' otherwise.
    """

    learning_rate: float = 0.0035
    iterations: int = 400
    support_set_size: int = 100
    split_mode: str = "auto"
    no_split_threshold: int = 1000
    seed: int = 0
    stop_gradient: bool = False
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    train_weights: bool = True
    pre_shuffle_seed: int | None = None
    use_prior: bool = False
    log_every: int = 100
    show_progress: bool = False

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be nonnegative, got {self.iterations}")
        if self.support_set_size < 1:
            raise ConfigError(f"support_set_size must be at least 1, got {self.support_set_size}")
        if self.split_mode not in SPLIT_MODES:
            available = list(SPLIT_MODES)
            raise ConfigError(f"Unknown split_mode '{self.split_mode}'. Available: {available}")
        if len(self.betas) != 2 or not all(0 <= b < 1 for b in self.betas):
            raise ConfigError(f"betas must be two values in [0, 1), got {self.betas}")
        if self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")

    def resolve_split_mode(self, num_examples: int) -> str:
        if self.split_mode != "auto":
            return self.split_mode
        return "no-split" if num_examples >= self.no_split_threshold else "split"


@dataclass
class FinetuneResult:
    psi: FilmParams
    weights: CovarianceWeights
    trace: list[dict[str, Any]] = field(default_factory=list)
    timings: list[dict[str, Any]] = field(default_factory=list)
    split_mode: str = "skipped"

    @property
    def skipped(self) -> bool:
        return self.split_mode == "skipped"


@dataclass
class Prediction:
    labels: Tensor
    log_probs: Tensor
    classes: tuple[int, ...]


def episode_loss(
    task: Task,
    backbone: BaseBackbone,
    psi: FilmParams,
    weights: CovarianceWeights | None,
    variant: HeadVariant | str,
    stop_gradient: bool = False,
    use_prior: bool = False,
) -> Tensor:
    """Summed query log-likelihood under the head configured from the support set.

    With stop_gradient the support embeddings are treated as constants; the
    value is unchanged, only the gradient differs.

    Raises:
        NotPositiveDefinite: If e is too small for the episode's covariances.
    """
    support = backbone(task.support.features, psi)
    if stop_gradient:
        support = support.detach()
    stats = estimate_stats(support, task.support.labels, task.way)
    cache = build_cache(stats, weights, variant, use_prior=use_prior)

    query = backbone(task.query.features, psi)
    log_probs = predict_log_probs(query, cache)
    return log_probs.gather(1, task.query.labels.unsqueeze(1)).sum()


def single_shot(dataset: LabelledDataset) -> bool:
    """True when every present class has exactly one example."""
    counts = dataset.class_counts()
    present = counts[counts > 0]
    return present.size > 0 and int(present.max()) == 1


class EpisodicTrainer:
    """Runs the episodic loop for one backbone/head pairing.

    Args:
        backbone: Frozen backbone (or its spec).
        variant: Head variant used to score episodes.
        config: Training settings.
        tracker: Receives per-iteration metrics.
        client_id: Tags errors raised during federated local updates.
    """

    def __init__(
        self,
        backbone: BaseBackbone | BackboneSpec,
        variant: HeadVariant | str,
        config: TrainConfig,
        tracker: RunTracker = NULL_TRACKER,
        client_id: int | None = None,
    ) -> None:
        config.validate()
        self.backbone = as_backbone(backbone)
        self.variant = HeadVariant.parse(variant)
        self.config = config
        self.tracker = tracker
        self.client_id = client_id

    def episode_source(
        self, dataset: LabelledDataset
    ) -> tuple[str, Callable[[np.random.Generator], Task]]:
        """Resolve the split mode and return a task sampler for it.

        Raises:
            TooFewShots: In split mode, if a class has a single example.
        """
        mode = self.config.resolve_split_mode(len(dataset))
        if mode == "use-all":
            task = full_task(dataset)
            return mode, lambda rng: task

        if mode == "split":
            source = dataset
            if self.config.pre_shuffle_seed is not None:
                shuffler = np.random.default_rng(self.config.pre_shuffle_seed)
                order = shuffler.permutation(len(dataset))
                source = dataset.subset(order)
            d_train, d_test = split_dataset(source)
        else:
            d_train = d_test = dataset
        size = self.config.support_set_size
        return mode, lambda rng: sample_task(d_train, d_test, size, rng)

    def train(
        self,
        dataset: LabelledDataset,
        psi: FilmParams | None = None,
        weights: CovarianceWeights | None = None,
        iterations: int | None = None,
        learning_rate: float | None = None,
        rng: np.random.Generator | None = None,
        after_step: Callable[[Tensor], Tensor] | None = None,
        lr_schedule: Callable[[int], float] | None = None,
    ) -> FinetuneResult:
        """Fine-tune from the given starting point (identity ψ, initial e by default).

        Args:
            dataset: Downstream data D.
            psi: Starting FiLM parameters.
            weights: Starting covariance weights.
            iterations: Overrides config.iterations.
            learning_rate: Overrides config.learning_rate.
            rng: Task sampling generator (default: seeded from config.seed).
            after_step: Maps the flat ψ vector after each optimizer step.
            lr_schedule: Learning rate per iteration; replaces the constant rate.

        Returns:
            FinetuneResult with detached parameters and the per-iteration trace.

        Raises:
            EmptyDataset: If dataset is empty.
            TooFewShots: In split mode, if a class has a single example.
            TrainingError: On a numeric failure, tagged with the iteration.
        """
        if dataset.is_empty():
            raise EmptyDataset("Cannot fine-tune on an empty dataset")
        psi = FilmParams.identity(self.backbone.film_widths()) if psi is None else psi.detach()
        weights = CovarianceWeights.initial() if weights is None else weights.detach()
        iterations = self.config.iterations if iterations is None else iterations
        lr = self.config.learning_rate if learning_rate is None else learning_rate

        if iterations == 0:
            mode = self.config.resolve_split_mode(len(dataset))
            return FinetuneResult(psi, weights, split_mode=mode)
        if single_shot(dataset):
            logger.warning("Every class has one example; skipping episodic fine-tuning")
            return FinetuneResult(psi, weights)

        mode, next_task = self.episode_source(dataset)
        rng = np.random.default_rng(self.config.seed) if rng is None else rng

        program = DiffProgram()
        psi_leaf = program.leaf("psi", psi.values)
        train_e = self.variant is not HeadVariant.PROTONETS and self.config.train_weights
        log_e = program.leaf("log_e", weights.log_values, trainable=train_e)
        program.seal()
        leaves = program.trainable()
        optimizer = torch.optim.Adam(
            list(leaves.values()),
            lr=lr,
            betas=self.config.betas,
            eps=self.config.eps,
            maximize=True,
        )

        trace: list[dict[str, Any]] = []
        timings: list[dict[str, Any]] = []
        desc = "Fine-tuning" if self.client_id is None else f"Client {self.client_id}"
        for it in tqdm(range(iterations), desc=desc, disable=not self.config.show_progress):
            start = time.perf_counter()
            if lr_schedule is not None:
                for group in optimizer.param_groups:
                    group["lr"] = lr_schedule(it)
            try:
                task = next_task(rng)
                loss = episode_loss(
                    task,
                    self.backbone,
                    FilmParams(psi.widths, psi_leaf),
                    CovarianceWeights(log_e),
                    self.variant,
                    stop_gradient=self.config.stop_gradient,
                    use_prior=self.config.use_prior,
                )
                grads = gradient(program, loss)
            except FitError as e:
                raise TrainingError(str(e), iteration=it, client_id=self.client_id) from e

            for name, leaf in leaves.items():
                leaf.grad = grads[name]
            optimizer.step()
            if after_step is not None:
                with torch.no_grad():
                    psi_leaf.copy_(after_step(psi_leaf.detach()))

            value = loss.detach().item()
            record = {
                "iteration": it,
                "loss": value,
                "mean_log_prob": value / task.query_size,
                "way": task.way,
                "support_size": task.support_size,
                "query_size": task.query_size,
            }
            trace.append(record)
            timings.append({"iteration": it, "seconds": time.perf_counter() - start})
            self.tracker.log_metrics(
                {"loss": record["loss"], "mean_log_prob": record["mean_log_prob"]}, step=it
            )
            if self.config.log_every and (it + 1) % self.config.log_every == 0:
                logger.info(
                    f"Iteration {it + 1}/{iterations} - loss: {record['loss']:.4f}, "
                    f"mean log p: {record['mean_log_prob']:.4f}, way: {task.way}"
                )

        return FinetuneResult(
            psi=FilmParams(psi.widths, psi_leaf.detach().clone()),
            weights=CovarianceWeights(log_e.detach().clone()),
            trace=trace,
            timings=timings,
            split_mode=mode,
        )


def finetune(
    dataset: LabelledDataset,
    backbone: BaseBackbone | BackboneSpec,
    config: TrainConfig,
    variant: HeadVariant | str,
    tracker: RunTracker = NULL_TRACKER,
) -> FinetuneResult:
    """Episodic fine-tuning from identity ψ and e = (0.5, 0.5, 1.0)."""
    return EpisodicTrainer(backbone, variant, config, tracker).train(dataset)


def embed(backbone: BaseBackbone | BackboneSpec, x: Tensor, psi: FilmParams | None) -> Tensor:
    """Embeddings without autograd history."""
    with torch.no_grad():
        return as_backbone(backbone)(torch.as_tensor(x, dtype=DTYPE), psi)


def fit_head(
    support: LabelledDataset,
    backbone: BaseBackbone | BackboneSpec,
    psi: FilmParams | None,
    weights: CovarianceWeights | None,
    variant: HeadVariant | str,
    classes: list[int] | None = None,
    use_prior: bool = False,
    compact_lda: bool = True,
) -> ClassifierCache:
    """Build a prediction cache from a support set.

    Args:
        classes: Classes the cache covers (default: the whole vocabulary).

    Raises:
        EmptyClass: If a covered class has no support example.
    """
    classes = list(range(support.num_classes)) if classes is None else [int(c) for c in classes]
    counts = support.class_counts()
    for c in classes:
        if c >= len(counts) or counts[c] == 0:
            raise EmptyClass(c)
    data = support.select_classes(classes, relabel=True)
    embeddings = embed(backbone, data.features, psi)
    with torch.no_grad():
        stats = estimate_stats(embeddings, data.labels, len(classes))
        return build_cache(stats, weights, variant, compact_lda, use_prior, classes)


def predict(
    support: LabelledDataset,
    psi: FilmParams | None,
    weights: CovarianceWeights | None,
    backbone: BaseBackbone | BackboneSpec,
    variant: HeadVariant | str,
    x: Tensor,
    use_prior: bool = False,
) -> Prediction:
    """Configure the head from all of `support` and classify x (d,) or (N, d)."""
    cache = fit_head(support, backbone, psi, weights, variant, use_prior=use_prior)
    x = torch.as_tensor(x, dtype=DTYPE)
    single = x.ndim == 1
    embeddings = embed(backbone, x.unsqueeze(0) if single else x, psi)
    log_probs = predict_log_probs(embeddings, cache)
    labels = predict_labels(embeddings, cache)
    if single:
        return Prediction(labels[0], log_probs[0], cache.classes)
    return Prediction(labels, log_probs, cache.classes)
