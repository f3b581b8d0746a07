"""Identity backbone with a single FiLM layer.

Used for precomputed or synthetic embeddings: b(x) = γ·x + β.
"""

import torch
from torch import Tensor

from src.core.errors import DimensionMismatch
from src.core.factories import BackboneFactory
from src.core.interfaces import BaseBackbone
from src.numerics import DTYPE

from .film import FilmParams, film
from .spec import BackboneSpec


class IdentityFilmBackbone(BaseBackbone):
    """Pass-through extractor followed by one FiLM layer on the d_b output."""

    def __init__(self, cfg: BackboneSpec) -> None:
        super().__init__()
        self.spec = cfg
        self._dim = cfg.input_dim

    @property
    def input_dim(self) -> int:
        return self._dim

    @property
    def output_dim(self) -> int:
        return self._dim

    def film_widths(self) -> list[int]:
        return [self._dim]

    def forward(self, x: Tensor, psi: FilmParams | None = None) -> Tensor:
        x = torch.as_tensor(x, dtype=DTYPE)
        if x.shape[-1] != self._dim:
            raise DimensionMismatch(f"Expected inputs of dimension {self._dim}, got {x.shape[-1]}")
        if psi is None:
            return x
        if list(psi.widths) != self.film_widths():
            raise DimensionMismatch(
                f"FiLM widths {list(psi.widths)} do not match backbone {self.film_widths()}"
            )
        return film(x, psi.layer(0))


BackboneFactory.register("identity-with-film", IdentityFilmBackbone)
