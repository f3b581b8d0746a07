# Core module - Interfaces, Factories and Errors
from .errors import FitError
from .factories import BackboneFactory, FederatedAlgorithmFactory
from .interfaces import BaseBackbone, BaseFederatedAlgorithm, PipelineStep

__all__ = [
    "FitError",
    "PipelineStep",
    "BaseBackbone",
    "BaseFederatedAlgorithm",
    "BackboneFactory",
    "FederatedAlgorithmFactory",
]
