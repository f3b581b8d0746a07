# Steps module: one PipelineStep per `fit` subcommand
from src.steps.common import RunOptions, RunStep, TrackingConfig, resolve_config
from src.steps.evaluate import EvalStep
from src.steps.fedsim import FedsimStep
from src.steps.filmstats import FilmstatsStep
from src.steps.finetune import FinetuneStep
from src.steps.paramcount import ParamcountStep
from src.steps.synth import SynthStep

STEPS = {
    "synth": SynthStep,
    "finetune": FinetuneStep,
    "eval": EvalStep,
    "fedsim": FedsimStep,
    "paramcount": ParamcountStep,
    "filmstats": FilmstatsStep,
}

__all__ = [
    "EvalStep",
    "FedsimStep",
    "FilmstatsStep",
    "FinetuneStep",
    "ParamcountStep",
    "RunOptions",
    "RunStep",
    "STEPS",
    "SynthStep",
    "TrackingConfig",
    "resolve_config",
]
