"""Summaries over repeated seeds."""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class SeedSummary:
    mean: float
    half_width: float
    n: int

    def to_record(self) -> dict:
        return {"mean": self.mean, "ci95": self.half_width, "n": self.n}

    def __str__(self) -> str:
        return f"{100 * self.mean:.1f} ± {100 * self.half_width:.1f}"


def summarize_seeds(values: Sequence[float]) -> SeedSummary:
    """Mean and 95% confidence half-width 1.96·std/√n (sample std)."""
    array = np.asarray(values, dtype=np.float64)
    if array.size == 0:
        raise ValueError("Need at least one value to summarize")
    std = float(array.std(ddof=1)) if array.size > 1 else 0.0
    return SeedSummary(float(array.mean()), 1.96 * std / math.sqrt(array.size), int(array.size))
