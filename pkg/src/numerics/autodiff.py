"""Reverse-mode gradients over named leaves.

A DiffProgram registers the leaves of a computation (trainable or constant).
The computation itself is ordinary torch code; torch autograd records the
graph during the forward pass and `gradient` accumulates adjoints back to the
trainable leaves. Covariance solves and log-determinants differentiate through
the Cholesky factor (see `src.numerics.linalg`).
"""

import logging
from typing import Callable

import torch
from torch import Tensor

from src.core.errors import DimensionMismatch, UnsupportedNode

from .linalg import DTYPE

logger = logging.getLogger(__name__)


class DiffProgram:
    """Named leaves of a differentiable computation.

    Leaves are added while the program is open; `seal()` freezes the leaf set.
    The same program can evaluate many forward passes (one per training step)
    since leaves are updated in place by the optimizer.
    """

    def __init__(self) -> None:
        self._leaves: dict[str, Tensor] = {}
        self._trainable: list[str] = []
        self._sealed = False

    def leaf(self, name: str, value: Tensor | list | float, trainable: bool = True) -> Tensor:
        """Register a leaf and return the tensor to compute with."""
        if self._sealed:
            raise ValueError("DiffProgram is sealed; no new leaves can be added")
        if name in self._leaves:
            raise ValueError(f"Leaf '{name}' already registered")
        tensor = torch.as_tensor(value, dtype=DTYPE).detach().clone()
        tensor.requires_grad_(trainable)
        self._leaves[name] = tensor
        if trainable:
            self._trainable.append(name)
        return tensor

    def seal(self) -> "DiffProgram":
        self._sealed = True
        return self

    @property
    def sealed(self) -> bool:
        return self._sealed

    def __getitem__(self, name: str) -> Tensor:
        return self._leaves[name]

    def __contains__(self, name: str) -> bool:
        return name in self._leaves

    def trainable(self) -> dict[str, Tensor]:
        """Trainable leaves in registration order."""
        return {name: self._leaves[name] for name in self._trainable}


def gradient(
    program: DiffProgram, loss_node: Tensor, retain_graph: bool = False
) -> dict[str, Tensor]:
    """Reverse-mode gradient of a scalar with respect to every trainable leaf.

    Leaves the loss does not depend on get a zero gradient.

    Raises:
        DimensionMismatch: If loss_node is not a scalar.
        UnsupportedNode: If a primitive in the graph has no adjoint.
    """
    if loss_node.numel() != 1:
        raise DimensionMismatch(f"Loss must be scalar, got shape {tuple(loss_node.shape)}")

    leaves = program.trainable()
    if not leaves:
        return {}
    if not loss_node.requires_grad:
        return {name: torch.zeros_like(t) for name, t in leaves.items()}

    try:
        grads = torch.autograd.grad(
            loss_node.reshape(()),
            list(leaves.values()),
            allow_unused=True,
            retain_graph=retain_graph,
        )
    except NotImplementedError as exc:
        raise UnsupportedNode(f"Primitive without adjoint: {exc}") from exc
    except RuntimeError as exc:
        message = str(exc)
        if "not implemented" in message or "must implement" in message:
            raise UnsupportedNode(f"Primitive without adjoint: {message}") from exc
        raise

    return {
        name: torch.zeros_like(leaf) if grad is None else grad
        for (name, leaf), grad in zip(leaves.items(), grads)
    }


def central_difference(
    fn: Callable[[Tensor], Tensor | float],
    x: Tensor,
    h: float = 1e-6,
) -> Tensor:
    """Central finite-difference gradient of a scalar function at x."""
    base = x.detach().clone().to(DTYPE)
    grad = torch.zeros_like(base)
    flat = base.view(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            original = float(flat[i])
            flat[i] = original + h
            upper = float(fn(base))
            flat[i] = original - h
            lower = float(fn(base))
            flat[i] = original
            grad.view(-1)[i] = (upper - lower) / (2.0 * h)
    return grad
