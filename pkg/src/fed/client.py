"""Federated clients: data partitioning and local FiLM updates."""

import logging
from dataclasses import dataclass

import numpy as np

from src.backbones.film import FilmParams
from src.backbones.spec import BackboneSpec
from src.core.errors import EmptyDataset, InsufficientData
from src.core.factories import FederatedAlgorithmFactory
from src.core.interfaces import BaseBackbone, BaseFederatedAlgorithm
from src.data.dataset import LabelledDataset
from src.episodic.trainer import EpisodicTrainer, TrainConfig, fit_head
from src.heads.naive_bayes import ClassifierCache
from src.heads.statistics import HeadVariant

from .config import FedConfig

logger = logging.getLogger(__name__)

# Federated clients always use the ProtoNets head; e is never trained or sent.
CLIENT_VARIANT = HeadVariant.PROTONETS


@dataclass
class ClientState:
    """One client's private data.

    `data` keeps the global label vocabulary, so labels are global class ids.
    `prototypes` is the client's per-class mean table under the last ψ it was
    refreshed with.
    """

    client_id: int
    classes: tuple[int, ...]
    data: LabelledDataset
    prototypes: ClassifierCache | None = None

    def __len__(self) -> int:
        return len(self.data)

    def refresh_prototypes(
        self, backbone: BaseBackbone | BackboneSpec, psi: FilmParams
    ) -> ClassifierCache:
        self.prototypes = fit_head(
            self.data, backbone, psi, None, CLIENT_VARIANT, list(self.classes)
        )
        return self.prototypes


def partition_clients(
    dataset: LabelledDataset,
    config: FedConfig,
    rng: np.random.Generator,
) -> list[ClientState]:
    """Give every client `classes_per_client` random classes and
    `shots_per_class` examples of each.

    Without `share_examples` an example goes to one client at most; each
    class pool is shuffled once and clients take consecutive runs from it.

    Raises:
        InsufficientData: If there are too few classes or examples.
    """
    config.validate()
    present = dataset.classes_present()
    if len(present) < config.classes_per_client:
        raise InsufficientData(
            f"Need {config.classes_per_client} classes per client, dataset has {len(present)}"
        )

    pools = {c: rng.permutation(dataset.indices_of(c)) for c in present}
    taken = {c: 0 for c in present}
    shots = config.shots_per_class

    clients = []
    for client_id in range(config.num_clients):
        chosen = rng.choice(present, size=config.classes_per_client, replace=False)
        classes = tuple(sorted(int(c) for c in chosen))
        indices: list[int] = []
        for c in classes:
            pool = pools[c]
            if config.share_examples:
                if len(pool) < shots:
                    raise InsufficientData(
                        f"Class {c} has {len(pool)} examples, {shots} needed per client"
                    )
                picked = rng.choice(pool, size=shots, replace=False)
            else:
                start = taken[c]
                if start + shots > len(pool):
                    raise InsufficientData(
                        f"Class {c} ran out of examples at client {client_id}: "
                        f"{len(pool)} available, {start + shots} needed without sharing"
                    )
                picked = pool[start:start + shots]
                taken[c] = start + shots
            indices.extend(int(i) for i in picked)
        clients.append(ClientState(client_id, classes, dataset.subset(sorted(indices))))

    logger.info(
        f"Partitioned {config.num_clients} clients: {config.classes_per_client} classes x "
        f"{shots} shots each"
    )
    return clients


def local_update(
    client: ClientState,
    global_psi: FilmParams,
    backbone: BaseBackbone | BackboneSpec,
    config: FedConfig,
    round_index: int,
    algorithm: BaseFederatedAlgorithm | None = None,
) -> FilmParams:
    """Train from the round's global ψ on the client's data alone.

    A fresh Adam optimizer runs `local_steps` episodic steps with the
    ProtoNets head at the round's learning rate. Task sampling is seeded by
    (seed, round, client id), so the result does not depend on which other
    clients ran or in which order.

    Args:
        round_index: 1-based round number; the learning rate uses round_index - 1.

    Raises:
        EmptyDataset: If the client holds no data.
        TrainingError: Tagged with the client id.
    """
    if client.data.is_empty():
        raise EmptyDataset(f"Client {client.client_id} holds no data")
    if config.local_steps == 0:
        return global_psi.detach()
    if algorithm is None:
        algorithm = FederatedAlgorithmFactory.create(config.algorithm, config.algorithm_config())

    lr = config.lr_at(round_index - 1)
    train_config = TrainConfig(
        learning_rate=lr,
        iterations=config.local_steps,
        support_set_size=config.support_set_size,
        split_mode=config.split_mode,
        seed=config.seed,
        log_every=0,
    )
    global_values = global_psi.values.detach().clone()
    seed = np.random.SeedSequence([config.seed, round_index, client.client_id])
    trainer = EpisodicTrainer(backbone, CLIENT_VARIANT, train_config, client_id=client.client_id)
    result = trainer.train(
        client.data,
        psi=global_psi,
        rng=np.random.default_rng(seed),
        after_step=lambda values: algorithm.proximal_step(values, global_values, lr),
    )
    return result.psi
