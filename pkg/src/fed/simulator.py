"""Single-process federated simulation over FiT models.

Each round the server samples `clients_per_round` clients without
replacement, sends them the global ψ, lets each run its local update, receives
the updated ψ vectors and averages them. Messages go through a
CommunicationLedger, which is where the cost columns of the round log come
from. Round 0 is a baseline row evaluated before any training.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from src.backbones.film import FilmParams
from src.backbones.spec import BackboneSpec, as_backbone
from src.core.errors import FederatedRunError, FitError
from src.core.factories import FederatedAlgorithmFactory
from src.core.interfaces import BaseBackbone
from src.data.dataset import LabelledDataset
from src.episodic.evaluation import evaluate
from src.episodic.trainer import embed
from src.heads.naive_bayes import ClassifierCache
from src.utils.manifest_io import append_to_manifest, write_manifest
from src.utils.tracking import NULL_TRACKER, RunTracker

from .client import ClientState, local_update, partition_clients
from .config import FedConfig
from .ledger import DOWN, UP, CommunicationLedger
from .server import aggregate_films, build_global_prototypes

logger = logging.getLogger(__name__)


@dataclass
class RoundLog:
    round: int
    client_ids: list[int]
    params_down: int
    params_up: int
    cum_cost: int
    global_acc: float | None
    personalized_acc: float | None

    def to_record(self) -> dict[str, Any]:
        return {
            "round": self.round,
            "client_ids": self.client_ids,
            "params_down": self.params_down,
            "params_up": self.params_up,
            "cum_cost": self.cum_cost,
            "global_acc": self.global_acc,
            "personalized_acc": self.personalized_acc,
        }


@dataclass
class PersonalModel:
    """A client's own classifier: the ψ it embeds with and its cache."""

    psi: FilmParams
    cache: ClassifierCache


@dataclass
class FederatedResult:
    logs: list[RoundLog]
    global_psi: FilmParams
    global_cache: ClassifierCache
    personal_models: dict[int, PersonalModel]
    clients: list[ClientState]
    ledger: CommunicationLedger = field(default_factory=CommunicationLedger)

    @property
    def final(self) -> RoundLog:
        return self.logs[-1]


def covered_test_set(
    test_set: LabelledDataset, clients: Sequence[ClientState]
) -> LabelledDataset:
    """Test examples of classes some client owns; the rest are dropped with a warning."""
    owned = sorted({c for client in clients for c in client.classes})
    dropped = sorted(set(test_set.classes_present()) - set(owned))
    if dropped:
        logger.warning(f"No client owns test class(es) {dropped}; leaving them out of evaluation")
    return test_set.select_classes(owned)


def global_accuracy(
    cache: ClassifierCache,
    test_set: LabelledDataset,
    backbone: BaseBackbone | BackboneSpec,
    psi: FilmParams,
) -> float:
    covered = test_set.select_classes(list(cache.classes))
    return evaluate(cache, embed(backbone, covered.features, psi), covered.labels).accuracy


def personalized_accuracy(
    models: dict[int, PersonalModel],
    clients: Sequence[ClientState],
    test_set: LabelledDataset,
    backbone: BaseBackbone | BackboneSpec,
) -> float | None:
    """Mean over clients of accuracy on test examples of that client's classes."""
    scores = []
    for client in clients:
        local_test = test_set.select_classes(list(client.classes))
        if local_test.is_empty():
            continue
        model = models[client.client_id]
        embeddings = embed(backbone, local_test.features, model.psi)
        scores.append(evaluate(model.cache, embeddings, local_test.labels).accuracy)
    return float(np.mean(scores)) if scores else None


def personalize(
    clients: Sequence[ClientState],
    psi: FilmParams,
    backbone: BaseBackbone | BackboneSpec,
) -> dict[int, PersonalModel]:
    """Per-client prototypes from the client's own data under the global ψ."""
    return {c.client_id: PersonalModel(psi, c.refresh_prototypes(backbone, psi)) for c in clients}


def run_federated(
    dataset: LabelledDataset,
    test_set: LabelledDataset,
    backbone: BaseBackbone | BackboneSpec,
    config: FedConfig,
    tracker: RunTracker = NULL_TRACKER,
    log_path: str | Path | None = None,
    clients: list[ClientState] | None = None,
) -> FederatedResult:
    """Run `config.rounds` federated rounds.

    Args:
        dataset: Pool the clients' data is drawn from.
        test_set: Held-out examples for global and personalized accuracy.
        backbone: Frozen backbone shared by every client.
        config: Federated settings.
        tracker: Receives per-round metrics.
        log_path: Round records are appended here as each round finishes.
        clients: Pre-built clients (default: partitioned from `dataset`).

    Raises:
        InsufficientData: If the dataset cannot be partitioned.
        FederatedRunError: If a round fails; carries the completed round logs.
    """
    config.validate()
    backbone = as_backbone(backbone)
    rng = np.random.default_rng(config.seed)
    if clients is None:
        clients = partition_clients(dataset, config, rng)
    by_id = {c.client_id: c for c in clients}
    algorithm = FederatedAlgorithmFactory.create(config.algorithm, config.algorithm_config())
    test_set = covered_test_set(test_set, clients)

    psi = FilmParams.identity(backbone.film_widths())
    ledger = CommunicationLedger()
    logs: list[RoundLog] = []
    if log_path is not None:
        write_manifest([], log_path)

    def evaluate_round(round_index: int, client_ids: list[int], evaluate_now: bool) -> None:
        global_acc = personal_acc = None
        if evaluate_now:
            cache = build_global_prototypes(
                clients, psi, backbone, weighted=config.weighted_prototypes
            )
            global_acc = global_accuracy(cache, test_set, backbone, psi)
            personal_acc = personalized_accuracy(
                personalize(clients, psi, backbone), clients, test_set, backbone
            )
        row = RoundLog(
            round=round_index,
            client_ids=client_ids,
            params_down=ledger.sent(DOWN, round_index),
            params_up=ledger.sent(UP, round_index),
            cum_cost=ledger.total,
            global_acc=global_acc,
            personalized_acc=personal_acc,
        )
        logs.append(row)
        if log_path is not None:
            append_to_manifest(row.to_record(), log_path)
        metrics = {"cum_cost": row.cum_cost}
        if global_acc is not None:
            metrics["global_acc"] = global_acc
        if personal_acc is not None:
            metrics["personalized_acc"] = personal_acc
        tracker.log_metrics(metrics, step=round_index)
        if evaluate_now:
            personal = "n/a" if personal_acc is None else f"{personal_acc:.4f}"
            logger.info(
                f"Round {round_index}/{config.rounds} - clients: {client_ids}, "
                f"cost: {row.cum_cost}, global acc: {global_acc:.4f}, personalized acc: {personal}"
            )

    try:
        evaluate_round(0, [], evaluate_now=True)
        for r in tqdm(range(1, config.rounds + 1), desc="Rounds", disable=not config.show_progress):
            selected = sorted(
                int(c) for c in rng.choice(len(clients), config.clients_per_round, replace=False)
            )
            selected = [clients[i].client_id for i in selected]
            for cid in selected:
                ledger.send(r, DOWN, cid, psi.count)

            updates = Parallel(n_jobs=config.n_jobs, prefer="threads")(
                delayed(local_update)(by_id[cid], psi, backbone, config, r, algorithm)
                for cid in selected
            )
            received = {}
            for cid, update in zip(selected, updates):
                ledger.send(r, UP, cid, update.count)
                received[cid] = update
            psi = aggregate_films(received)

            last = r == config.rounds
            evaluate_round(r, selected, evaluate_now=last or r % config.eval_every == 0)
    except FitError as e:
        raise FederatedRunError(f"Round {len(logs)} failed: {e}", logs) from e

    global_cache = build_global_prototypes(
        clients, psi, backbone, weighted=config.weighted_prototypes
    )
    return FederatedResult(
        logs=logs,
        global_psi=psi,
        global_cache=global_cache,
        personal_models=personalize(clients, psi, backbone),
        clients=clients,
        ledger=ledger,
    )
