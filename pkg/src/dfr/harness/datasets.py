from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..numerics import as_matrix


@dataclass
class DomainDataset:
    """Feature rows for one domain; ``labels`` is None for an unlabeled target."""

    features: np.ndarray
    labels: np.ndarray | None = None
    name: str = ""
    n_classes: int | None = None

    def __post_init__(self):
        self.features = as_matrix(self.features, f"{self.name or 'dataset'} features")
        n, d = self.features.shape
        if n < 1 or d < 1:
            raise DataError(f"{self.name or 'dataset'}: need at least one row and one column")
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (n,):
                raise DataError(f"{self.name or 'dataset'}: {labels.size} labels for {n} rows")
            if not np.issubdtype(labels.dtype, np.integer):
                if not np.all(labels == np.round(labels)):
                    raise DataError(f"{self.name or 'dataset'}: labels must be integers")
            self.labels = labels.astype(np.int64)
            if self.labels.min() < 0:
                raise DataError(f"{self.name or 'dataset'}: negative label")
            if self.n_classes is not None and self.labels.max() >= self.n_classes:
                raise DataError(
                    f"{self.name or 'dataset'}: label {self.labels.max()} outside [0, {self.n_classes})"
                )

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def labeled(self) -> bool:
        return self.labels is not None

    def class_count(self) -> int:
        if self.n_classes is not None:
            return self.n_classes
        if self.labels is None:
            raise DataError(f"{self.name or 'dataset'}: unlabeled, class count unknown")
        return int(self.labels.max()) + 1
