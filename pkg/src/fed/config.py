"""Federated simulation settings."""

from dataclasses import dataclass

from src.core.errors import ConfigError

ALGORITHMS = ("fedavg", "fedprox")


@dataclass(frozen=True)
class FedConfig:
    """Settings of one federated run.

    The client learning rate at round r (0-based) is
    learning_rate · lr_decay^(r // decay_every).

    With `share_examples` false every example is owned by at most one client;
    otherwise clients draw from the full pool of their classes independently.

    The upper bound trains for `upper_bound_steps` (default rounds · local_steps,
    the sequential steps behind the global ψ). The lower bound trains each client
    for `lower_bound_steps`, by default the steps a client spends in expectation
    over a federated run: rounds · local_steps · clients_per_round / num_clients.
    Both follow the round learning-rate schedule stretched over their budget.
    """

    num_clients: int = 20
    classes_per_client: int = 10
    shots_per_class: int = 5
    rounds: int = 60
    clients_per_round: int = 5
    local_steps: int = 10
    learning_rate: float = 0.003
    lr_decay: float = 0.3
    decay_every: int = 20
    algorithm: str = "fedavg"
    mu: float = 0.01
    seed: int = 0
    n_jobs: int = 1
    share_examples: bool = False
    weighted_prototypes: bool = False
    support_set_size: int = 100
    split_mode: str = "auto"
    eval_every: int = 1
    upper_bound_steps: int | None = None
    lower_bound_steps: int | None = None
    show_progress: bool = False

    def validate(self) -> None:
        for name in ("num_clients", "classes_per_client", "shots_per_class", "clients_per_round"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        for name in ("rounds", "local_steps"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if self.clients_per_round > self.num_clients:
            raise ConfigError(
                f"clients_per_round ({self.clients_per_round}) exceeds "
                f"num_clients ({self.num_clients})"
            )
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 < self.lr_decay <= 1:
            raise ConfigError(f"lr_decay must lie in (0, 1], got {self.lr_decay}")
        if self.decay_every < 1:
            raise ConfigError(f"decay_every must be at least 1, got {self.decay_every}")
        if self.algorithm not in ALGORITHMS:
            available = list(ALGORITHMS)
            raise ConfigError(f"Unknown algorithm '{self.algorithm}'. Available: {available}")
        if self.mu < 0:
            raise ConfigError(f"mu must be nonnegative, got {self.mu}")
        if self.n_jobs == 0:
            raise ConfigError("n_jobs must be nonzero (-1 uses all cores)")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be at least 1, got {self.eval_every}")
        for name in ("upper_bound_steps", "lower_bound_steps"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ConfigError(f"{name} must be nonnegative, got {value}")

    def lr_at(self, round_index: int) -> float:
        return self.learning_rate * self.lr_decay ** (round_index // self.decay_every)

    def bound_steps(self, name: str) -> int:
        """Step budget of the "upper" or "lower" bound."""
        explicit = getattr(self, f"{name}_bound_steps")
        if explicit is not None:
            return explicit
        total = self.rounds * self.local_steps
        if name == "upper" or total == 0:
            return total
        return max(1, round(total * self.clients_per_round / self.num_clients))

    def bound_lr(self, step: int, budget: int) -> float:
        """Learning rate at `step` of a bound trained for `budget` steps."""
        return self.lr_at(step * self.rounds // budget)

    def algorithm_config(self) -> dict:
        return {"mu": self.mu}
