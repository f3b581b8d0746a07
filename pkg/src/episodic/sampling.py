"""Dataset splitting and episodic task sampling.

`split_dataset` sends the first ceil(N_c/2) examples of every class (dataset
order) to the train half and the rest to the test half. `sample_task` draws a
way uniformly from [min(C, 5), min(C, support_set_size)], a class subset
without replacement, round(S / way) support shots and up to 2000 / way query
shots per class. Indices are drawn per class, without replacement.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import torch

from src.core.errors import EmptyDataset, TooFewShots
from src.data.dataset import LabelledDataset

logger = logging.getLogger(__name__)

MIN_WAY = 5
MAX_QUERY_TOTAL = 2000


@dataclass(frozen=True)
class Task:
    """One episode. Labels are relabelled 0..way-1 in `classes` order."""

    support: LabelledDataset
    query: LabelledDataset
    classes: tuple[int, ...]

    @property
    def way(self) -> int:
        return len(self.classes)

    @property
    def support_size(self) -> int:
        return len(self.support)

    @property
    def query_size(self) -> int:
        return len(self.query)


def split_dataset(dataset: LabelledDataset) -> tuple[LabelledDataset, LabelledDataset]:
    """Per-class half split in dataset order.

    Raises:
        TooFewShots: If a present class has a single example.
    """
    counts = dataset.class_counts()
    train_idx: list[int] = []
    test_idx: list[int] = []
    for c in dataset.classes_present():
        if counts[c] < 2:
            raise TooFewShots(c, int(counts[c]), required=2)
        indices = dataset.indices_of(c)
        cut = math.ceil(len(indices) / 2)
        train_idx.extend(indices[:cut].tolist())
        test_idx.extend(indices[cut:].tolist())
    return dataset.subset(sorted(train_idx)), dataset.subset(sorted(test_idx))


def _pick(indices: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    if shots == 0:
        return indices[:0]
    return indices[rng.choice(len(indices), shots, replace=False)]


def _gather(
    dataset: LabelledDataset, picks: list[np.ndarray], num_classes: int
) -> LabelledDataset:
    index = np.concatenate(picks).astype(np.int64)
    labels = np.concatenate(
        [np.full(len(p), label, dtype=np.int64) for label, p in enumerate(picks)]
    )
    return LabelledDataset(dataset.features[torch.from_numpy(index)], labels, num_classes)


def sample_task(
    d_train: LabelledDataset,
    d_test: LabelledDataset,
    support_set_size: int,
    rng: np.random.Generator,
) -> Task:
    """Sample a support/query task.

    Raises:
        EmptyDataset: If either side has no examples.
    """
    classes = d_train.classes_present()
    if not classes or d_test.is_empty():
        raise EmptyDataset("Cannot sample a task from an empty train or test set")

    min_way = min(len(classes), MIN_WAY, support_set_size)
    max_way = min(len(classes), support_set_size)
    way = int(rng.integers(min_way, max_way + 1))
    selected = [int(c) for c in rng.choice(classes, size=way, replace=False)]

    balanced_shots = max(round(support_set_size / way), 1)
    max_test_shots = max(1, MAX_QUERY_TOTAL // way)

    support_picks = []
    query_picks = []
    for c in selected:
        train_indices = d_train.indices_of(c)
        shots = min(len(train_indices), balanced_shots)
        support_picks.append(_pick(train_indices, shots, rng))

        test_indices = d_test.indices_of(c)
        shots = min(len(test_indices), max_test_shots)
        query_picks.append(_pick(test_indices, shots, rng))

    query = _gather(d_test, query_picks, way)
    if query.is_empty():
        raise EmptyDataset(f"No query examples for classes {selected}")
    return Task(_gather(d_train, support_picks, way), query, tuple(selected))


def full_task(dataset: LabelledDataset) -> Task:
    """D_S = D_Q = D over the classes present."""
    classes = dataset.classes_present()
    if not classes:
        raise EmptyDataset("Cannot build a task from an empty dataset")
    relabelled = dataset.select_classes(classes, relabel=True)
    return Task(relabelled, relabelled, tuple(classes))


def limit_shots(
    dataset: LabelledDataset,
    shots: int,
    rng: np.random.Generator | None = None,
) -> LabelledDataset:
    """Keep at most `shots` examples per class.

    Without rng the first examples in dataset order are kept; with rng a
    random subset is drawn. Dataset order is preserved either way.
    """
    if shots <= 0:
        raise ValueError(f"shots must be positive, got {shots}")
    keep: list[int] = []
    for c in dataset.classes_present():
        indices = dataset.indices_of(c)
        if rng is None or len(indices) <= shots:
            keep.extend(indices[:shots].tolist())
        else:
            keep.extend(_pick(indices, shots, rng).tolist())
    return dataset.subset(sorted(keep))
