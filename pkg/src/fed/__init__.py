# Federated module
from src.fed.algorithms import FedAvg, FedProx
from src.fed.baselines import BoundResult, lower_bound, train_alone, upper_bound
from src.fed.client import CLIENT_VARIANT, ClientState, local_update, partition_clients
from src.fed.config import ALGORITHMS, FedConfig
from src.fed.ledger import DOWN, UP, CommunicationLedger, Message, communication_cost
from src.fed.server import aggregate_films, build_global_prototypes
from src.fed.simulator import (
    FederatedResult,
    PersonalModel,
    RoundLog,
    covered_test_set,
    global_accuracy,
    personalize,
    personalized_accuracy,
    run_federated,
)

__all__ = [
    "ALGORITHMS",
    "BoundResult",
    "CLIENT_VARIANT",
    "ClientState",
    "CommunicationLedger",
    "DOWN",
    "FedAvg",
    "FedConfig",
    "FedProx",
    "FederatedResult",
    "Message",
    "PersonalModel",
    "RoundLog",
    "UP",
    "aggregate_films",
    "build_global_prototypes",
    "communication_cost",
    "covered_test_set",
    "global_accuracy",
    "local_update",
    "lower_bound",
    "partition_clients",
    "personalize",
    "personalized_accuracy",
    "run_federated",
    "train_alone",
    "upper_bound",
]
