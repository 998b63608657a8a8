"""Mean activation vectors and distances in activation space.

A class model is the per-channel mean of the activation vectors the base
network classified correctly, plus one Weibull tail model per channel for
the distances between those vectors and the mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, ActivationSample
from .errors import ConfigError, DataError, DimensionError, EmptyClassError, ZeroVectorError
from .weibull import WeibullModel

METRICS = ("euclidean", "cosine", "eucos")

#: Default weight on the Euclidean term of the eucos distance. Chosen so
#: final-layer-scale vectors (Euclidean distances of order hundreds)
#: contribute comparably to the cosine term's [0, 2] range.
DEFAULT_EUCOS_WEIGHT = 1.0 / 200.0


@dataclass(frozen=True)
class ClassModel:
    """Per-class calibration result: mean activation vector and Weibull
    tail models, one per channel."""

    class_id: int
    mav: np.ndarray
    weibull: tuple[WeibullModel, ...]
    n_support: int

    def __post_init__(self):
        mav = np.array(self.mav, dtype=np.float64, copy=True, order="C")
        if mav.ndim != 2:
            raise DataError("mav must be 2-D (channels x classes)")
        if not np.all(np.isfinite(mav)):
            raise DataError("non-finite value in mav")
        weibull = tuple(self.weibull)
        if len(weibull) != mav.shape[0]:
            raise DimensionError(
                f"{len(weibull)} Weibull models for {mav.shape[0]} channels"
            )
        mav.setflags(write=False)
        object.__setattr__(self, "class_id", int(self.class_id))
        object.__setattr__(self, "mav", mav)
        object.__setattr__(self, "weibull", weibull)
        object.__setattr__(self, "n_support", int(self.n_support))


def correct_subset(dataset: Dataset) -> dict[int, list[ActivationSample]]:
    """Group training samples by class, keeping only those the base network
    classifies correctly.

    A sample counts as correct when the argmax of its channel-mean
    activations equals its label; argmax ties go to the lowest class
    index. Every class id maps to a list; an empty list flags a class with
    no correct samples, which calibration skips.
    """
    if dataset.partition != "train":
        raise DataError(f"correct_subset needs the train partition, got {dataset.partition!r}")
    per_class: dict[int, list[ActivationSample]] = {j: [] for j in range(dataset.n_classes)}
    for sample in dataset.samples:
        mean_av = sample.activations.astype(np.float64).mean(axis=0)
        if int(np.argmax(mean_av)) == sample.label:
            per_class[sample.label].append(sample)
    return per_class


def compute_mav(samples: list[ActivationSample]) -> np.ndarray:
    """Elementwise mean of the samples' activations, per channel.

    Returns a (C, N) float64 matrix; exact for exactly representable
    inputs.
    """
    if not samples:
        raise EmptyClassError("cannot average an empty class")
    stacked = np.stack([s.activations for s in samples]).astype(np.float64)
    return stacked.mean(axis=0)


def distance(av, mav, metric: str = "eucos", eucos_weight: float = DEFAULT_EUCOS_WEIGHT) -> float:
    """Distance between an activation vector and a mean activation vector.

    euclidean
        ``||av - mav||_2``
    cosine
        ``1 - av.mav / (||av|| ||mav||)``, clamped at 0 against rounding.
    eucos
        ``eucos_weight * euclidean + cosine``

    Raises ZeroVectorError when cosine is requested for a zero vector.
    """
    a = np.asarray(av, dtype=np.float64).ravel()
    b = np.asarray(mav, dtype=np.float64).ravel()
    if a.size != b.size:
        raise DimensionError(f"vector lengths differ: {a.size} vs {b.size}")
    if metric == "euclidean":
        return float(np.linalg.norm(a - b))
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVectorError("cosine distance undefined for a zero vector")
    cosine = max(0.0, 1.0 - float(np.dot(a, b)) / (norm_a * norm_b))
    if metric == "cosine":
        return cosine
    return eucos_weight * float(np.linalg.norm(a - b)) + cosine


def class_distances(
    per_class: dict[int, list[ActivationSample]],
    mavs: dict[int, np.ndarray],
    metric: str = "eucos",
    eucos_weight: float = DEFAULT_EUCOS_WEIGHT,
) -> dict[int, np.ndarray]:
    """Distances from each class's correct samples to that class's MAV.

    Channel c of a sample is compared against channel c of the MAV. For
    every class id in ``mavs``, returns a (C, n_samples) array whose row c
    lists the per-sample distances on channel c.
    """
    out: dict[int, np.ndarray] = {}
    for class_id, mav in mavs.items():
        samples = per_class[class_id]
        if not samples:
            raise EmptyClassError(f"class {class_id} has no correct samples")
        acts = np.stack([s.activations for s in samples]).astype(np.float64)
        n_channels = mav.shape[0]
        dists = np.empty((n_channels, len(samples)))
        for c in range(n_channels):
            dists[c] = _distances_to_vector(acts[:, c, :], mav[c], metric, eucos_weight)
        out[class_id] = dists
    return out


def _distances_to_vector(rows: np.ndarray, vec: np.ndarray, metric: str, eucos_weight: float) -> np.ndarray:
    """Vectorized twin of :func:`distance`: rows of ``rows`` against ``vec``."""
    if metric == "euclidean":
        return np.linalg.norm(rows - vec, axis=1)
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}")
    row_norms = np.linalg.norm(rows, axis=1)
    vec_norm = float(np.linalg.norm(vec))
    if vec_norm == 0.0 or np.any(row_norms == 0.0):
        raise ZeroVectorError("cosine distance undefined for a zero vector")
    cosine = np.maximum(0.0, 1.0 - (rows @ vec) / (row_norms * vec_norm))
    if metric == "cosine":
        return cosine
    return eucos_weight * np.linalg.norm(rows - vec, axis=1) + cosine
