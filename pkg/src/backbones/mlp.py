"""Frozen random MLP adapted by FiLM.

Each hidden layer is Linear -> standardize -> FiLM -> ReLU; the output layer is
Linear followed by a final FiLM on the d_b embedding. The frozen weights are a
scaled Gaussian (std = gain/√fan_in) drawn from a generator seeded by the spec
and stored as buffers, so they never receive gradients.
"""

import math

import torch
import torch.nn.functional as F
from torch import Tensor

from src.core.errors import DimensionMismatch
from src.core.factories import BackboneFactory
from src.core.interfaces import BaseBackbone
from src.numerics import DTYPE

from .film import FilmParams, film
from .spec import BackboneSpec


class MlpFilmBackbone(BaseBackbone):
    """Multi-layer perceptron with frozen weights and FiLM after each normalization."""

    def __init__(self, cfg: BackboneSpec) -> None:
        super().__init__()
        self.spec = cfg
        self._dims = [cfg.input_dim, *cfg.hidden_widths, cfg.embedding_dim]
        self.num_layers = len(self._dims) - 1

        generator = torch.Generator().manual_seed(cfg.seed)
        for i, (fan_in, fan_out) in enumerate(zip(self._dims[:-1], self._dims[1:])):
            std = cfg.gain / math.sqrt(fan_in)
            weight = torch.randn(fan_out, fan_in, generator=generator, dtype=DTYPE) * std
            self.register_buffer(f"weight_{i}", weight)
            self.register_buffer(f"bias_{i}", torch.zeros(fan_out, dtype=DTYPE))

    @property
    def input_dim(self) -> int:
        return self._dims[0]

    @property
    def output_dim(self) -> int:
        return self._dims[-1]

    def film_widths(self) -> list[int]:
        return self.spec.film_widths()

    def _linear(self, h: Tensor, i: int) -> Tensor:
        return F.linear(h, getattr(self, f"weight_{i}"), getattr(self, f"bias_{i}"))

    def forward(self, x: Tensor, psi: FilmParams | None = None) -> Tensor:
        x = torch.as_tensor(x, dtype=DTYPE)
        if x.shape[-1] != self.input_dim:
            raise DimensionMismatch(
                f"Expected inputs of dimension {self.input_dim}, got {x.shape[-1]}"
            )
        if psi is not None and list(psi.widths) != self.film_widths():
            raise DimensionMismatch(
                f"FiLM widths {list(psi.widths)} do not match backbone {self.film_widths()}"
            )
        layers = psi.layers() if psi is not None else []

        h = x
        for i in range(self.num_layers - 1):
            h = self._linear(h, i)
            h = F.layer_norm(h, (h.shape[-1],), eps=self.spec.norm_eps)
            if layers:
                h = film(h, layers[i])
            h = F.relu(h)

        h = self._linear(h, self.num_layers - 1)
        if layers and self.spec.final_film:
            h = film(h, layers[-1])
        return h


BackboneFactory.register("mlp-with-film", MlpFilmBackbone)
