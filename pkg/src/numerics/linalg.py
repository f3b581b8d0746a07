"""Dense PSD linear algebra in double precision.

All covariance work goes through a Cholesky factor: solves use two triangular
solves and log-determinants read the factor's diagonal. Every function accepts
batched inputs (leading dimensions) and is differentiable through torch.
"""

from dataclasses import dataclass

import torch
from torch import Tensor

from src.core.errors import DimensionMismatch, NotPositiveDefinite

DTYPE = torch.float64


def as_matrix(a: Tensor | list | float) -> Tensor:
    """Convert to a float64 tensor without copying when already float64."""
    return torch.as_tensor(a, dtype=DTYPE)


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor L with positive diagonal, L·Lᵀ = A."""

    lower: Tensor

    @property
    def dim(self) -> int:
        return int(self.lower.shape[-1])

    def reconstruct(self) -> Tensor:
        """Return L·Lᵀ."""
        return self.lower @ self.lower.mT


def _require_square(a: Tensor, name: str = "matrix") -> int:
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionMismatch(f"{name} must be square, got shape {tuple(a.shape)}")
    return int(a.shape[-1])


def cholesky(a: Tensor, jitter: float = 0.0) -> CholeskyFactor:
    """Factor a symmetric PSD matrix (or batch of matrices).

    Args:
        a: Symmetric matrix of shape (..., n, n).
        jitter: Nonnegative value added to the diagonal before factoring.

    Returns:
        CholeskyFactor with L·Lᵀ = a + jitter·I.

    Raises:
        NotPositiveDefinite: If a pivot is not strictly positive after jitter.
    """
    a = as_matrix(a)
    n = _require_square(a)
    if jitter < 0:
        raise ValueError(f"jitter must be nonnegative, got {jitter}")
    if not bool(torch.isfinite(a).all()):
        raise NotPositiveDefinite("Matrix has non-finite entries")
    if jitter:
        a = a + jitter * torch.eye(n, dtype=DTYPE)

    lower, info = torch.linalg.cholesky_ex(a)
    if bool((info > 0).any()):
        order = int(info.max())
        raise NotPositiveDefinite(
            f"Leading minor of order {order} is not positive definite; "
            "raise the identity weight e3 or the jitter"
        )
    return CholeskyFactor(lower)


def chol_solve(factor: CholeskyFactor, b: Tensor) -> Tensor:
    """Solve (L·Lᵀ)·x = b.

    Args:
        factor: Cholesky factor of shape (..., n, n).
        b: Right-hand side of shape (n,) or (..., n, k).

    Returns:
        x with the same shape as b.
    """
    b = as_matrix(b)
    n = factor.dim
    vector = b.ndim == 1
    rhs = b.unsqueeze(-1) if vector else b
    if rhs.shape[-2] != n:
        raise DimensionMismatch(f"Factor is {n}x{n} but right-hand side has {rhs.shape[-2]} rows")
    x = torch.cholesky_solve(rhs, factor.lower)
    return x.squeeze(-1) if vector else x


def tri_solve(factor: CholeskyFactor, b: Tensor) -> Tensor:
    """Return L⁻¹·b for b of shape (..., n, k)."""
    b = as_matrix(b)
    if b.shape[-2] != factor.dim:
        raise DimensionMismatch(
            f"Factor is {factor.dim}x{factor.dim} but right-hand side has {b.shape[-2]} rows"
        )
    return torch.linalg.solve_triangular(factor.lower, b, upper=False)


def chol_logdet(factor: CholeskyFactor) -> Tensor:
    """Return log det(L·Lᵀ) = 2·Σ log L_ii."""
    diagonal = torch.diagonal(factor.lower, dim1=-2, dim2=-1)
    return 2.0 * torch.log(diagonal).sum(-1)


def squared_distance(x: Tensor, centers: Tensor) -> Tensor:
    """Squared Euclidean distance between rows of x (N, d) and centers (C, d) -> (N, C)."""
    if x.shape[-1] != centers.shape[-1]:
        raise DimensionMismatch(
            f"Points have dimension {x.shape[-1]} but centers have {centers.shape[-1]}"
        )
    diff = x.unsqueeze(-2) - centers.unsqueeze(-3)
    return (diff * diff).sum(-1)
