"""Held-out evaluation of configured heads."""

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
import torch
from sklearn.metrics import accuracy_score, confusion_matrix, recall_score
from torch import Tensor

from src.backbones.film import FilmParams
from src.backbones.spec import BackboneSpec
from src.core.errors import DimensionMismatch, EmptyDataset
from src.core.interfaces import BaseBackbone
from src.data.dataset import LabelledDataset
from src.heads.linear import LinearHead, linear_forward
from src.heads.naive_bayes import ClassifierCache, predict_log_probs
from src.heads.statistics import CovarianceWeights, HeadVariant

from .trainer import embed, fit_head

logger = logging.getLogger(__name__)


@dataclass
class EvaluationReport:
    """Accuracy summary over one labelled test set.

    `per_class_accuracy` is recall per class in `classes` order; classes with
    no test example score 0 and are left out of `macro_accuracy`.
    """

    accuracy: float
    per_class_accuracy: list[float]
    macro_accuracy: float
    mean_log_likelihood: float
    confusion: list[list[int]]
    classes: list[int]
    num_examples: int

    def to_record(self) -> dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "per_class_accuracy": self.per_class_accuracy,
            "macro_accuracy": self.macro_accuracy,
            "mean_log_likelihood": self.mean_log_likelihood,
            "confusion_matrix": self.confusion,
            "classes": self.classes,
            "num_examples": self.num_examples,
        }


def _report(log_probs: Tensor, labels: Tensor, classes: list[int]) -> EvaluationReport:
    positions = {c: i for i, c in enumerate(classes)}
    y_true = [int(y) for y in labels.tolist()]
    missing = sorted({y for y in y_true if y not in positions})
    if missing:
        raise DimensionMismatch(f"Test labels {missing} are not covered by the head")
    if not y_true:
        raise EmptyDataset("Cannot evaluate on an empty test set")

    rows = torch.as_tensor([positions[y] for y in y_true], dtype=torch.long)
    # argmax picks the first maximal row, matching predict_labels
    y_pred = [classes[int(r)] for r in torch.argmax(log_probs, dim=-1)]
    per_class = recall_score(y_true, y_pred, labels=classes, average=None, zero_division=0)
    present = np.isin(classes, y_true)
    log_likelihood = log_probs.gather(1, rows.unsqueeze(1)).mean()

    return EvaluationReport(
        accuracy=float(accuracy_score(y_true, y_pred)),
        per_class_accuracy=[float(v) for v in per_class],
        macro_accuracy=float(per_class[present].mean()),
        mean_log_likelihood=float(log_likelihood),
        confusion=confusion_matrix(y_true, y_pred, labels=classes).tolist(),
        classes=list(classes),
        num_examples=len(y_true),
    )


def evaluate(cache: ClassifierCache, embeddings: Tensor, labels: Tensor) -> EvaluationReport:
    """Score a cache on embedded test points whose labels it covers."""
    with torch.no_grad():
        log_probs = predict_log_probs(torch.as_tensor(embeddings), cache)
    return _report(log_probs, torch.as_tensor(labels), list(cache.classes))


def evaluate_model(
    support: LabelledDataset,
    test: LabelledDataset,
    backbone: BaseBackbone | BackboneSpec,
    psi: FilmParams | None,
    weights: CovarianceWeights | None,
    variant: HeadVariant | str,
    use_prior: bool = False,
) -> EvaluationReport:
    """Configure the head from `support` and score it on `test`."""
    classes = support.classes_present()
    cache = fit_head(support, backbone, psi, weights, variant, classes, use_prior=use_prior)
    report = evaluate(cache, embed(backbone, test.features, psi), test.labels)
    logger.info(
        f"{HeadVariant.parse(variant).value} accuracy {report.accuracy:.4f} "
        f"on {report.num_examples} examples"
    )
    return report


def evaluate_linear(
    head: LinearHead,
    test: LabelledDataset,
    backbone: BaseBackbone | BackboneSpec,
    psi: FilmParams | None,
) -> EvaluationReport:
    """Score a trained linear head; its rows are classes 0..C-1."""
    with torch.no_grad():
        logits = linear_forward(head, embed(backbone, test.features, psi))
        log_probs = torch.log_softmax(logits, dim=-1)
    return _report(log_probs, test.labels, list(range(head.num_classes)))
