from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..layers.complex import ComplexTensor
from ..manifold import DEFAULT_EPS


@dataclass
class Dataset:
    """Labelled complex samples of shape (N, C, H, W), kept Cartesian."""

    samples: np.ndarray
    labels: np.ndarray
    classes: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.samples.ndim != 4:
            raise ValueError(f"samples must be (N, C, H, W), got shape {self.samples.shape}")
        if len(self.samples) != len(self.labels):
            raise ValueError(f"{len(self.samples)} samples but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.classes):
            raise ValueError(f"labels must lie in [0, {self.classes})")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def sample_shape(self) -> tuple:
        return tuple(self.samples.shape[1:])

    def subset(self, idx) -> "Dataset":
        return Dataset(self.samples[idx], self.labels[idx], self.classes)

    def tensor(self, idx=slice(None), eps: float = DEFAULT_EPS) -> ComplexTensor:
        return ComplexTensor.from_complex(self.samples[idx], eps)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.classes)

    def batches(self, batch_size: int, order=None):
        """Yield (ComplexTensor, labels) in ``order`` (default: stored order)."""
        order = np.arange(len(self)) if order is None else np.asarray(order)
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            yield self.tensor(idx), self.labels[idx]
