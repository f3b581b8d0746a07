"""Labelled feature-vector datasets and their CSV format.

CSV rows are the input features followed by one integer label column. A
header row is optional and detected automatically.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch
from torch import Tensor
from torch.utils.data import Dataset

from src.core.errors import (
    DimensionMismatch,
    EmptyDataset,
    NonFiniteValue,
    ParseError,
    RaggedRows,
)
from src.numerics import DTYPE

logger = logging.getLogger(__name__)


class LabelledDataset(Dataset):
    """Feature matrix (N, d_in) with integer labels in [0, C).

    Classes may be empty; operations that need examples of a class check for
    that themselves.
    """

    def __init__(
        self,
        features: Tensor | np.ndarray | Sequence,
        labels: Tensor | np.ndarray | Sequence,
        num_classes: int | None = None,
        class_names: Sequence[str] | None = None,
    ) -> None:
        """Initialize dataset.

        Args:
            features: (N, d_in) feature values.
            labels: (N,) class indices.
            num_classes: C; inferred as max label + 1 when None.
            class_names: Optional name per class.
        """
        features = torch.as_tensor(features, dtype=DTYPE)
        labels = torch.as_tensor(labels, dtype=torch.long)
        if features.ndim == 1 and features.numel() == 0:
            features = features.reshape(0, 0)
        if features.ndim != 2:
            raise DimensionMismatch(f"Features must be (N, d), got {tuple(features.shape)}")
        if labels.shape != (features.shape[0],):
            raise DimensionMismatch(
                f"{features.shape[0]} feature rows but labels have shape {tuple(labels.shape)}"
            )
        if not bool(torch.isfinite(features).all()):
            raise NonFiniteValue("Feature values must be finite")

        inferred = int(labels.max()) + 1 if labels.numel() else 0
        self.num_classes = inferred if num_classes is None else int(num_classes)
        if labels.numel() and (int(labels.min()) < 0 or inferred > self.num_classes):
            raise DimensionMismatch(f"Labels must lie in [0, {self.num_classes})")

        self.features = features
        self.labels = labels
        if class_names is None:
            class_names = [str(c) for c in range(self.num_classes)]
        if len(class_names) != self.num_classes:
            raise DimensionMismatch(
                f"{len(class_names)} class names for {self.num_classes} classes"
            )
        self.class_names = list(class_names)

    def __len__(self) -> int:
        """Return number of examples."""
        return int(self.labels.shape[0])

    def __getitem__(self, idx: int) -> tuple[Tensor, int]:
        return self.features[idx], int(self.labels[idx])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def is_empty(self) -> bool:
        return len(self) == 0

    def class_counts(self) -> np.ndarray:
        """Examples per class, length C."""
        return np.bincount(self.labels.numpy(), minlength=self.num_classes)

    def classes_present(self) -> list[int]:
        """Classes with at least one example, ascending."""
        return [int(c) for c in np.flatnonzero(self.class_counts())]

    def indices_of(self, class_id: int) -> np.ndarray:
        """Positions of a class's examples in dataset order."""
        return np.flatnonzero(self.labels.numpy() == class_id)

    def subset(self, indices: Iterable[int]) -> "LabelledDataset":
        """Rows at the given positions, keeping the class vocabulary."""
        index = torch.as_tensor(np.asarray(list(indices), dtype=np.int64), dtype=torch.long)
        return LabelledDataset(
            self.features[index], self.labels[index], self.num_classes, self.class_names
        )

    def select_classes(self, class_ids: Sequence[int], relabel: bool = False) -> "LabelledDataset":
        """Rows whose label is in class_ids.

        With relabel=True labels become positions in class_ids and the
        vocabulary shrinks to those classes.
        """
        wanted = np.isin(self.labels.numpy(), np.asarray(class_ids, dtype=np.int64))
        subset = self.subset(np.flatnonzero(wanted))
        if not relabel:
            return subset
        mapping = {int(c): i for i, c in enumerate(class_ids)}
        labels = [mapping[int(y)] for y in subset.labels]
        names = [self.class_names[int(c)] for c in class_ids]
        return LabelledDataset(subset.features, labels, len(class_ids), names)

    @classmethod
    def concat(cls, datasets: Sequence["LabelledDataset"]) -> "LabelledDataset":
        """Stack datasets sharing one vocabulary."""
        if not datasets:
            raise EmptyDataset("Nothing to concatenate")
        first = datasets[0]
        same_vocabulary = all(d.num_classes == first.num_classes for d in datasets)
        return cls(
            torch.cat([d.features for d in datasets]),
            torch.cat([d.labels for d in datasets]),
            max(d.num_classes for d in datasets),
            first.class_names if same_vocabulary else None,
        )


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _parse_label(cell: str, row: int, column: int) -> int:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"label '{cell}' is not a number", row, column) from None
    if not value.is_integer() or value < 0:
        raise ParseError(f"label '{cell}' is not a nonnegative integer", row, column)
    return int(value)


def load_csv(path: str | Path) -> LabelledDataset:
    """Load a dataset from CSV.

    Args:
        path: CSV with d_in feature columns then an integer label column.

    Returns:
        LabelledDataset with C = max label + 1.

    Raises:
        FileNotFoundError: If the file doesn't exist.
        ParseError: If a cell cannot be parsed (row/column are 1-based).
        RaggedRows: If rows have different column counts.
        EmptyDataset: If the file has no data rows.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset not found: {path}")

    features: list[list[float]] = []
    labels: list[int] = []
    width = None
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        for row_num, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            cells = [cell.strip() for cell in row]
            if row_num == 1 and not all(_is_number(cell) for cell in cells):
                width = len(cells)
                continue
            if width is None:
                width = len(cells)
            if len(cells) != width:
                raise RaggedRows(f"expected {width} columns, found {len(cells)}", row_num)
            if width < 2:
                raise ParseError("need at least one feature column and a label column", row_num)

            values = []
            for col_num, cell in enumerate(cells[:-1], start=1):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(f"'{cell}' is not a number", row_num, col_num) from None
                if not math.isfinite(values[-1]):
                    raise ParseError(f"'{cell}' is not a finite number", row_num, col_num)
            features.append(values)
            labels.append(_parse_label(cells[-1], row_num, width))

    if not features:
        raise EmptyDataset(f"No data rows in {path}")
    dataset = LabelledDataset(features, labels)
    logger.info(f"Loaded {len(dataset)} examples, {dataset.num_classes} classes from {path}")
    return dataset


def save_csv(dataset: LabelledDataset, path: str | Path, header: bool = True) -> Path:
    """Write a dataset as CSV; float repr keeps values exact on reload."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        if header:
            writer.writerow([f"x{j}" for j in range(dataset.dim)] + ["label"])
        for x, y in zip(dataset.features.tolist(), dataset.labels.tolist()):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])
    return path
