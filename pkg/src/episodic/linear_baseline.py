"""Linear-head baseline: cross-entropy training on all of D.

The head starts at zero and is trained full-batch with Adam, optionally
together with ψ. There is no task sampling; every step sees the whole dataset.
"""

import logging
from dataclasses import dataclass, field
from typing import Any

import torch
from tqdm import tqdm

from src.backbones.film import FilmParams
from src.backbones.spec import BackboneSpec, as_backbone
from src.core.errors import EmptyDataset, FitError, TrainingError
from src.core.interfaces import BaseBackbone
from src.data.dataset import LabelledDataset
from src.heads.linear import LinearHead, linear_forward, linear_loss
from src.numerics import DiffProgram, gradient
from src.utils.tracking import NULL_TRACKER, RunTracker

from .trainer import TrainConfig

logger = logging.getLogger(__name__)


@dataclass
class LinearResult:
    head: LinearHead
    psi: FilmParams
    trace: list[dict[str, Any]] = field(default_factory=list)


def finetune_linear(
    dataset: LabelledDataset,
    backbone: BaseBackbone | BackboneSpec,
    config: TrainConfig,
    train_film: bool = True,
    tracker: RunTracker = NULL_TRACKER,
) -> LinearResult:
    """Train a zero-initialized linear head (and optionally ψ) on D.

    Args:
        dataset: Downstream data D.
        backbone: Frozen backbone or its spec.
        config: Uses learning_rate, iterations, betas, eps and logging settings.
        train_film: Also update ψ; otherwise ψ stays at identity.
        tracker: Receives per-iteration loss and accuracy.

    Raises:
        EmptyDataset: If dataset is empty.
        TrainingError: On a numeric failure, tagged with the iteration.
    """
    config.validate()
    if dataset.is_empty():
        raise EmptyDataset("Cannot train a linear head on an empty dataset")
    backbone = as_backbone(backbone)
    psi = FilmParams.identity(backbone.film_widths())
    head = LinearHead.zeros(dataset.num_classes, backbone.output_dim)

    program = DiffProgram()
    weight = program.leaf("weight", head.weight)
    bias = program.leaf("bias", head.bias)
    psi_leaf = program.leaf("psi", psi.values, trainable=train_film)
    program.seal()
    leaves = program.trainable()
    optimizer = torch.optim.Adam(
        list(leaves.values()), lr=config.learning_rate, betas=config.betas, eps=config.eps
    )

    trace: list[dict[str, Any]] = []
    for it in tqdm(range(config.iterations), desc="Linear head", disable=not config.show_progress):
        try:
            embeddings = backbone(dataset.features, FilmParams(psi.widths, psi_leaf))
            current = LinearHead(weight, bias)
            loss = linear_loss(current, embeddings, dataset.labels)
            grads = gradient(program, loss)
        except FitError as e:
            raise TrainingError(str(e), iteration=it) from e

        with torch.no_grad():
            predicted = linear_forward(current, embeddings).argmax(dim=-1)
            accuracy = float((predicted == dataset.labels).double().mean())
        for name, leaf in leaves.items():
            leaf.grad = grads[name]
        optimizer.step()

        record = {"iteration": it, "loss": loss.detach().item(), "train_accuracy": accuracy}
        trace.append(record)
        tracker.log_metrics({"loss": record["loss"], "train_accuracy": accuracy}, step=it)
        if config.log_every and (it + 1) % config.log_every == 0:
            logger.info(
                f"Iteration {it + 1}/{config.iterations} - loss: {record['loss']:.4f}, "
                f"train acc: {accuracy:.4f}"
            )

    return LinearResult(
        head=LinearHead(weight.detach().clone(), bias.detach().clone()),
        psi=FilmParams(psi.widths, psi_leaf.detach().clone()),
        trace=trace,
    )
