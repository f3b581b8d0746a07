# Numerics module
from src.numerics.autodiff import DiffProgram, central_difference, gradient
from src.numerics.linalg import (
    DTYPE,
    CholeskyFactor,
    as_matrix,
    chol_logdet,
    chol_solve,
    cholesky,
    squared_distance,
    tri_solve,
)

__all__ = [
    "DTYPE",
    "CholeskyFactor",
    "DiffProgram",
    "as_matrix",
    "central_difference",
    "chol_logdet",
    "chol_solve",
    "cholesky",
    "gradient",
    "squared_distance",
    "tri_solve",
]
