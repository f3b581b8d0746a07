# Data module
from src.data.dataset import LabelledDataset, load_csv, save_csv
from src.data.synth import SynthResult, SynthSpec, class_means, generate_synth

__all__ = [
    "LabelledDataset",
    "SynthResult",
    "SynthSpec",
    "class_means",
    "generate_synth",
    "load_csv",
    "save_csv",
]
