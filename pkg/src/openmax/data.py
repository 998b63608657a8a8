"""Labeled activation-vector samples and immutable dataset containers.

Activations are stored as float32 matrices of shape (channels, classes),
matching the on-disk layout, so binary round-trips are bit-exact. All
downstream numerics promote to float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError

PARTITIONS = ("train", "validation", "openset", "fooling")

OPENSET_LABEL = -1
FOOLING_LABEL = -2


@dataclass(frozen=True)
class ActivationSample:
    """One labeled activation vector.

    ``activations[c, j]`` is the raw score the base network assigned to
    class ``j`` on channel (crop) ``c``. Labels ``0..N-1`` mark known
    classes; ``-1`` marks open-set and ``-2`` fooling ground truth, which
    exist only for evaluation and never enter calibration.
    """

    label: int
    activations: np.ndarray

    def __post_init__(self):
        acts = np.array(self.activations, dtype=np.float32, copy=True, order="C")
        if acts.ndim != 2:
            raise DataError(
                f"activations must be 2-D (channels x classes), got shape {acts.shape}"
            )
        n_channels, n_classes = acts.shape
        if n_channels < 1:
            raise DataError("need at least one channel")
        if n_classes < 2:
            raise DataError("need at least two classes")
        if not np.all(np.isfinite(acts)):
            raise DataError("non-finite activation value")
        label = int(self.label)
        if label not in (OPENSET_LABEL, FOOLING_LABEL) and not 0 <= label < n_classes:
            raise DataError(f"label {label} out of range for {n_classes} classes")
        acts.setflags(write=False)
        object.__setattr__(self, "activations", acts)
        object.__setattr__(self, "label", label)

    @property
    def n_channels(self) -> int:
        return self.activations.shape[0]

    @property
    def n_classes(self) -> int:
        return self.activations.shape[1]


@dataclass(frozen=True)
class Dataset:
    """Ordered, immutable collection of activation samples.

    Every sample must match the declared channel/class dimensions, and a
    train partition may only carry known labels. Instances are safe to
    share across threads.
    """

    n_classes: int
    n_channels: int
    samples: tuple[ActivationSample, ...]
    partition: str

    def __post_init__(self):
        if self.partition not in PARTITIONS:
            raise DataError(f"unknown partition {self.partition!r}")
        n_classes = int(self.n_classes)
        n_channels = int(self.n_channels)
        if n_classes < 2 or n_channels < 1:
            raise DataError("dataset needs N >= 2 classes and C >= 1 channels")
        samples = tuple(self.samples)
        for i, sample in enumerate(samples):
            if sample.activations.shape != (n_channels, n_classes):
                raise DimensionError(
                    f"sample {i} has shape {sample.activations.shape}, "
                    f"dataset declares ({n_channels}, {n_classes})"
                )
            if self.partition == "train" and sample.label < 0:
                raise DataError("train partition may only contain known labels")
        object.__setattr__(self, "n_classes", n_classes)
        object.__setattr__(self, "n_channels", n_channels)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def labels(self) -> np.ndarray:
        """Sample labels in dataset order."""
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def stack(self) -> np.ndarray:
        """All activations as one (n_samples, C, N) float32 array."""
        if not self.samples:
            return np.empty((0, self.n_channels, self.n_classes), dtype=np.float32)
        return np.stack([s.activations for s in self.samples])
