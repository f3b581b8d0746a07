"""Exception hierarchy for the FiT toolkit.

Every error raised on purpose by the library derives from FitError so that the
CLI can turn it into a structured message and a non-zero exit code.
"""

from typing import Any


class FitError(Exception):
    """Base class for all library errors."""

    def context(self) -> dict[str, Any]:
        """Extra fields included in structured error output."""
        return {}

    def to_record(self) -> dict[str, Any]:
        """Return a JSON-serializable description of the error."""
        return {"error": type(self).__name__, "message": str(self), **self.context()}


class NotPositiveDefinite(FitError, ArithmeticError):
    """A Cholesky pivot was not strictly positive (degenerate covariance)."""


class DimensionMismatch(FitError, ValueError):
    """Operand shapes do not conform."""


class UnsupportedNode(FitError, TypeError):
    """A primitive in a differentiable program has no adjoint."""


class EmptyClass(FitError, ValueError):
    """A class that must have examples has none."""

    def __init__(self, class_id: int, message: str | None = None) -> None:
        self.class_id = class_id
        super().__init__(message or f"Class {class_id} has no examples")

    def context(self) -> dict[str, Any]:
        return {"class_id": self.class_id}


class TooFewShots(FitError, ValueError):
    """A class has fewer examples than an operation requires."""

    def __init__(self, class_id: int, count: int, required: int = 2) -> None:
        self.class_id = class_id
        self.count = count
        self.required = required
        super().__init__(
            f"Class {class_id} has {count} example(s); at least {required} required"
        )

    def context(self) -> dict[str, Any]:
        return {"class_id": self.class_id, "count": self.count, "required": self.required}


class EmptyDataset(FitError, ValueError):
    """A dataset that must hold examples is empty."""


class NonFiniteValue(FitError, ValueError):
    """Features hold NaN or infinite entries."""


class InsufficientData(FitError, ValueError):
    """Not enough examples to satisfy a partitioning request."""


class UncoveredClass(FitError, ValueError):
    """Evaluation classes that no client owns."""

    def __init__(self, class_ids: list[int]) -> None:
        self.class_ids = list(class_ids)
        super().__init__(f"No client owns class(es) {self.class_ids}")

    def context(self) -> dict[str, Any]:
        return {"class_ids": self.class_ids}


class ParseError(FitError, ValueError):
    """A data file could not be parsed."""

    def __init__(self, message: str, row: int, column: int | None = None) -> None:
        self.row = row
        self.column = column
        where = f"row {row}" if column is None else f"row {row}, column {column}"
        super().__init__(f"{where}: {message}")

    def context(self) -> dict[str, Any]:
        return {"row": self.row, "column": self.column}


class RaggedRows(ParseError):
    """Rows of a data file have differing column counts."""


class ConfigError(FitError, ValueError):
    """Configuration is invalid or contains unknown keys."""


class TrainingError(FitError, RuntimeError):
    """A numeric failure during training, tagged with where it happened."""

    def __init__(self, message: str, iteration: int, client_id: int | None = None) -> None:
        self.iteration = iteration
        self.client_id = client_id
        prefix = f"iteration {iteration}"
        if client_id is not None:
            prefix = f"client {client_id}, {prefix}"
        super().__init__(f"{prefix}: {message}")

    def context(self) -> dict[str, Any]:
        return {"iteration": self.iteration, "client_id": self.client_id}


class FederatedRunError(FitError, RuntimeError):
    """A federated run stopped early; `logs` holds the rounds completed so far."""

    def __init__(self, message: str, logs: list[Any]) -> None:
        self.logs = list(logs)
        super().__init__(message)

    def context(self) -> dict[str, Any]:
        return {"completed_rounds": len(self.logs)}
