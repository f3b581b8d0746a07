"""Reference points for federated runs.

The upper bound trains one model centrally on the union of every client's
data. The lower bound trains every client alone, averages the resulting ψ
once and builds global prototypes under the average. Step budgets come from
FedConfig.bound_steps: the upper bound gets the sequential steps behind the
federated global ψ, a lower-bound client the steps it would spend as a
participant. Each run uses a single Adam optimizer whose learning rate follows
the round schedule stretched over its budget.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

from src.backbones.film import FilmParams
from src.backbones.spec import BackboneSpec, as_backbone
from src.core.interfaces import BaseBackbone
from src.data.dataset import LabelledDataset
from src.episodic.trainer import EpisodicTrainer, TrainConfig, fit_head
from src.heads.naive_bayes import ClassifierCache, restrict_cache

from .client import CLIENT_VARIANT, ClientState
from .config import FedConfig
from .server import aggregate_films, build_global_prototypes
from .simulator import PersonalModel, covered_test_set, global_accuracy, personalized_accuracy

logger = logging.getLogger(__name__)


@dataclass
class BoundResult:
    name: str
    global_psi: FilmParams
    global_cache: ClassifierCache
    personal_models: dict[int, PersonalModel]
    global_acc: float | None = None
    personalized_acc: float | None = None
    steps: int = 0

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "steps": self.steps,
            "global_acc": self.global_acc,
            "personalized_acc": self.personalized_acc,
        }


def train_alone(
    data: LabelledDataset,
    backbone: BaseBackbone | BackboneSpec,
    config: FedConfig,
    seed: int,
    steps: int,
) -> FilmParams:
    """ProtoNets episodic fine-tuning from identity ψ for `steps` iterations."""
    train_config = TrainConfig(
        learning_rate=config.learning_rate,
        iterations=steps,
        support_set_size=config.support_set_size,
        split_mode=config.split_mode,
        seed=seed,
        log_every=0,
    )
    trainer = EpisodicTrainer(backbone, CLIENT_VARIANT, train_config)
    if steps == 0:
        return trainer.train(data).psi
    return trainer.train(data, lr_schedule=lambda it: config.bound_lr(it, steps)).psi


def _score(
    result: BoundResult,
    clients: Sequence[ClientState],
    test_set: LabelledDataset | None,
    backbone: BaseBackbone,
) -> BoundResult:
    if test_set is None:
        return result
    covered = covered_test_set(test_set, clients)
    result.global_acc = global_accuracy(result.global_cache, covered, backbone, result.global_psi)
    result.personalized_acc = personalized_accuracy(
        result.personal_models, clients, covered, backbone
    )
    logger.info(
        f"{result.name} bound - global acc: {result.global_acc:.4f}, "
        f"personalized acc: {result.personalized_acc}"
    )
    return result


def upper_bound(
    clients: Sequence[ClientState],
    backbone: BaseBackbone | BackboneSpec,
    config: FedConfig,
    test_set: LabelledDataset | None = None,
) -> BoundResult:
    """Centralized training on the union of client data.

    The global cache holds prototypes from all of that data; a client's
    personalized model restricts it to the client's classes, renormalizing
    the posterior over them.
    """
    backbone = as_backbone(backbone)
    union = LabelledDataset.concat([c.data for c in clients])
    steps = config.bound_steps("upper")
    psi = train_alone(union, backbone, config, config.seed, steps)
    classes = sorted({c for client in clients for c in client.classes})
    cache = fit_head(union, backbone, psi, None, CLIENT_VARIANT, classes)
    personal = {
        c.client_id: PersonalModel(psi, restrict_cache(cache, list(c.classes))) for c in clients
    }
    result = BoundResult("upper", psi, cache, personal, steps=steps)
    return _score(result, clients, test_set, backbone)


def lower_bound(
    clients: Sequence[ClientState],
    backbone: BaseBackbone | BackboneSpec,
    config: FedConfig,
    test_set: LabelledDataset | None = None,
) -> BoundResult:
    """Independent local training, ψ averaged once at the end.

    Client i trains with seed config.seed + i. Its personalized model is its
    own locally trained ψ with prototypes from its own data.
    """
    backbone = as_backbone(backbone)
    steps = config.bound_steps("lower")
    trained = {
        c.client_id: train_alone(c.data, backbone, config, config.seed + c.client_id, steps)
        for c in clients
    }
    psi = aggregate_films(trained)
    cache = build_global_prototypes(clients, psi, backbone, weighted=config.weighted_prototypes)
    personal = {}
    for client in clients:
        own = trained[client.client_id]
        personal[client.client_id] = PersonalModel(own, client.refresh_prototypes(backbone, own))
    result = BoundResult("lower", psi, cache, personal, steps=steps)
    return _score(result, clients, test_set, backbone)
