# Backbones module
from src.backbones.film import (
    FilmLayer,
    FilmParams,
    film,
    film_magnitude_stats,
    load_film,
    save_film,
)
from src.backbones.identity import IdentityFilmBackbone
from src.backbones.mlp import MlpFilmBackbone
from src.backbones.spec import (
    RESNET50_BACKBONE_PARAMS,
    RESNET50_FILM_LAYOUT,
    BackboneSpec,
    ReferenceLayout,
    as_backbone,
    film_param_count,
    load_backbone_spec,
    read_backbone_record,
    save_backbone_spec,
)

__all__ = [
    "BackboneSpec",
    "FilmLayer",
    "FilmParams",
    "IdentityFilmBackbone",
    "MlpFilmBackbone",
    "RESNET50_BACKBONE_PARAMS",
    "RESNET50_FILM_LAYOUT",
    "ReferenceLayout",
    "as_backbone",
    "film",
    "film_magnitude_stats",
    "film_param_count",
    "load_backbone_spec",
    "load_film",
    "read_backbone_record",
    "save_backbone_spec",
    "save_film",
]
