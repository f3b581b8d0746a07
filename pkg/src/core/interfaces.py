"""Abstract base classes for FiT components.

These interfaces define the contracts for interchangeable strategies:
- PipelineStep: Base class for every CLI subcommand
- BaseBackbone: Frozen feature extractor adapted by FiLM layers
- BaseFederatedAlgorithm: Client-side objective variant for federated rounds
"""

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING, Any

from torch import Tensor, nn

if TYPE_CHECKING:
    from src.backbones.film import FilmParams


class BaseBackbone(nn.Module, ABC):
    """Abstract base class for FiLM-adapted frozen backbones.

    Frozen weights live in buffers, so the only tensors that can receive a
    gradient are the FiLM parameters passed to `forward`.
    Implementations: IdentityFilmBackbone, MlpFilmBackbone
    """

    @abstractmethod
    def forward(self, x: Tensor, psi: "FilmParams | None" = None) -> Tensor:
        """Embed a batch of inputs.

        Args:
            x: Inputs of shape (N, input_dim).
            psi: FiLM parameters matching `film_widths()`. None runs the frozen
                network with every FiLM layer removed.

        Returns:
            Embeddings of shape (N, output_dim).
        """
        pass

    @abstractmethod
    def film_widths(self) -> list[int]:
        """Return the channel count of every FiLM placement, front to back."""
        pass

    @property
    @abstractmethod
    def input_dim(self) -> int:
        """Dimension of a single input vector."""
        pass

    @property
    @abstractmethod
    def output_dim(self) -> int:
        """Embedding dimension d_b."""
        pass


class BaseFederatedAlgorithm(ABC):
    """Abstract base class for federated client objectives.

    Implementations: FedAvg, FedProx
    """

    def __init__(self, cfg: dict[str, Any]) -> None:
        self.cfg = cfg

    @property
    @abstractmethod
    def name(self) -> str:
        """Registered algorithm name."""
        pass

    @abstractmethod
    def proximal_step(self, values: Tensor, global_values: Tensor, lr: float) -> Tensor:
        """Apply the algorithm's correction after one local optimizer step.

        Args:
            values: Flat FiLM vector after the optimizer step.
            global_values: Flat FiLM vector received from the server this round.
            lr: Learning rate of the step just taken.

        Returns:
            Corrected flat FiLM vector.
        """
        pass


class PipelineStep(ABC):
    """Abstract base class for CLI subcommands.

    Every subcommand of the `fit` entry point implements this interface.
    """

    def __init__(self, config: dict[str, Any] | None = None) -> None:
        """Initialize the pipeline step.

        Args:
            config: Resolved configuration dictionary for this step.
        """
        self.config = config or {}

    @abstractmethod
    def run(self) -> int:
        """Execute the pipeline step.

        Returns:
            Exit code (0 for success, non-zero for failure).
        """
        pass

    def validate(self) -> bool:
        """Validate inputs before running.

        Returns:
            True if validation passes, False otherwise.
        """
        return True

    @property
    @abstractmethod
    def name(self) -> str:
        """Return the step name (e.g., 'finetune')."""
        pass

    @property
    def description(self) -> str:
        """Return a brief description of what this step does."""
        return ""
