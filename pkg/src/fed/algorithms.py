"""Client objectives for federated rounds.

FedAvg maximizes the local log-likelihood alone. FedProx subtracts
μ/2·‖ψ − ψ_global‖², applied after each optimizer step as the exact proximal
map of that penalty, so μ = 0 leaves the step untouched.
"""

from typing import Any

from torch import Tensor

from src.core.errors import ConfigError
from src.core.factories import FederatedAlgorithmFactory
from src.core.interfaces import BaseFederatedAlgorithm


class FedAvg(BaseFederatedAlgorithm):
    """Plain local training; the server averages the results."""

    @property
    def name(self) -> str:
        return "fedavg"

    def proximal_step(self, values: Tensor, global_values: Tensor, lr: float) -> Tensor:
        return values


class FedProx(FedAvg):
    """Local training pulled toward the round's global ψ."""

    def __init__(self, cfg: dict[str, Any]) -> None:
        super().__init__(cfg)
        self.mu = float(cfg.get("mu", 0.01))
        if self.mu < 0:
            raise ConfigError(f"mu must be nonnegative, got {self.mu}")

    @property
    def name(self) -> str:
        return "fedprox"

    def proximal_step(self, values: Tensor, global_values: Tensor, lr: float) -> Tensor:
        if self.mu == 0:
            return values
        step = lr * self.mu
        return (values + step * global_values) / (1.0 + step)


FederatedAlgorithmFactory.register("fedavg", FedAvg)
FederatedAlgorithmFactory.register("fedprox", FedProx)
