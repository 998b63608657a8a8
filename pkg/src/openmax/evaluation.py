"""Open-set evaluation: confusion counts, F-measure, threshold sweeps,
detection rates, and hyper-parameter grid search.

Counting convention: a validation sample is a true positive when predicted
as its own class and a false positive otherwise, including when it is
rejected (a rejected known sample is an error against known ground truth).
An open-set or fooling sample accepted as any known class is a false
negative; rejecting it counts nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Dataset
from .errors import ArityError, ConfigError, EmptyDatasetError
from .mav import DEFAULT_EUCOS_WEIGHT
from .scoring import (
    Hyperparams,
    OpenMaxModel,
    Prediction,
    calibrate,
    openmax_multichannel,
    softmax_multichannel,
)

SCORERS = ("openmax", "softmax_threshold")


@dataclass(frozen=True)
class OpenSetCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "fn"):
            value = int(getattr(self, name))
            if value < 0:
                raise ConfigError(f"{name} must be non-negative")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class SweepCurve:
    """F-measure and counts over a strictly increasing threshold grid."""

    thresholds: tuple[float, ...]
    fmeasures: tuple[float, ...]
    counts: tuple[OpenSetCounts, ...]

    def __post_init__(self):
        thresholds = tuple(float(t) for t in self.thresholds)
        if len(thresholds) != len(self.fmeasures) or len(thresholds) != len(self.counts):
            raise ArityError("curve columns must have equal lengths")
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ConfigError("thresholds must be strictly increasing")
        object.__setattr__(self, "thresholds", thresholds)
        object.__setattr__(self, "fmeasures", tuple(float(f) for f in self.fmeasures))
        object.__setattr__(self, "counts", tuple(self.counts))


@dataclass(frozen=True)
class GridSearchResult:
    eta: int
    alpha: int
    epsilon: float
    fmeasure: float

    @property
    def hyperparams(self) -> Hyperparams:
        return Hyperparams(alpha=self.alpha, epsilon=self.epsilon)


def open_set_counts(predictions: Sequence[Prediction], labels: Sequence[int]) -> OpenSetCounts:
    """Tally open-set confusion counts for aligned predictions and labels.

    Labels >= 0 are known ground truth; -1 marks open-set and -2 fooling
    samples.
    """
    if len(predictions) != len(labels):
        raise ArityError(f"{len(predictions)} predictions for {len(labels)} labels")
    tp = fp = fn = 0
    for pred, label in zip(predictions, labels):
        label = int(label)
        if label >= 0:
            if pred.verdict == "known" and pred.class_id == label:
                tp += 1
            else:
                fp += 1
        elif pred.verdict == "known":
            fn += 1
    return OpenSetCounts(tp, fp, fn)


def f_measure(counts: OpenSetCounts) -> float:
    """2 TP / (2 TP + FP + FN); 0 by convention when all counts are zero."""
    denom = 2 * counts.tp + counts.fp + counts.fn
    if denom == 0:
        return 0.0
    return 2.0 * counts.tp / denom


def _score_table(
    model: OpenMaxModel,
    dataset: Dataset,
    scorer: str,
    hp: Hyperparams,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample sufficient statistics for threshold application.

    Returns (y_star, peak) where y_star indexes the N+1 classes (0 =
    unknown; softmax never produces 0) and peak is the winning
    probability. Argmax ties go to the lowest index.
    """
    if scorer not in SCORERS:
        raise ConfigError(f"unknown scorer {scorer!r}")
    y_star = np.empty(len(dataset), dtype=np.int64)
    peak = np.empty(len(dataset))
    for i, sample in enumerate(dataset.samples):
        if scorer == "openmax":
            probs = openmax_multichannel(sample, model, hp).probs
            top = int(np.argmax(probs))
        else:
            probs = softmax_multichannel(sample)
            top = int(np.argmax(probs)) + 1
        y_star[i] = top
        peak[i] = probs[top] if scorer == "openmax" else probs[top - 1]
    return y_star, peak


def _counts_at(
    y_star: np.ndarray, peak: np.ndarray, labels: np.ndarray, epsilon: float
) -> OpenSetCounts:
    rejected = (y_star == 0) | (peak < epsilon)
    known = labels >= 0
    correct = ~rejected & (y_star - 1 == labels)
    tp = int(np.sum(known & correct))
    fp = int(np.sum(known)) - tp
    fn = int(np.sum(~known & ~rejected))
    return OpenSetCounts(tp, fp, fn)


def threshold_sweep(
    model: OpenMaxModel,
    validation: Dataset,
    openset: Dataset,
    fooling: Dataset,
    scorer: str,
    thresholds: Sequence[float],
    hp: Hyperparams = Hyperparams(),
) -> SweepCurve:
    """F-measure over the test protocol for each threshold.

    Each sample is scored once; thresholds are applied in a single pass
    over the cached (argmax, peak) statistics, so the curve is exactly
    what per-threshold recomputation would give.
    """
    thresholds = [float(t) for t in thresholds]
    if not thresholds:
        raise ConfigError("threshold grid is empty")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ConfigError("thresholds must be strictly increasing")
    parts = (validation, openset, fooling)
    if any(len(p) == 0 for p in parts):
        raise EmptyDatasetError("validation, openset and fooling must all be non-empty")
    tables = [_score_table(model, part, scorer, hp) for part in parts]
    y_star = np.concatenate([t[0] for t in tables])
    peak = np.concatenate([t[1] for t in tables])
    labels = np.concatenate([p.labels() for p in parts])
    counts = tuple(_counts_at(y_star, peak, labels, eps) for eps in thresholds)
    return SweepCurve(
        thresholds=tuple(thresholds),
        fmeasures=tuple(f_measure(c) for c in counts),
        counts=counts,
    )


def detection_accuracy(
    model: OpenMaxModel,
    dataset: Dataset,
    scorer: str,
    epsilon: float,
    hp: Hyperparams = Hyperparams(),
) -> float:
    """Fraction of the dataset rejected (as unknown or uncertain) at the
    given threshold."""
    return detection_curve(model, dataset, scorer, [epsilon], hp)[0]


def detection_curve(
    model: OpenMaxModel,
    dataset: Dataset,
    scorer: str,
    epsilons: Sequence[float],
    hp: Hyperparams = Hyperparams(),
) -> list[float]:
    """Rejection rate at each threshold, scoring every sample once."""
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot compute a rejection rate on an empty dataset")
    y_star, peak = _score_table(model, dataset, scorer, hp)
    return [
        float(np.mean((y_star == 0) | (peak < float(eps)))) for eps in epsilons
    ]


def grid_search(
    train: Dataset,
    validation: Dataset,
    openset_sample: Dataset,
    eta_grid: Sequence[int],
    alpha_grid: Sequence[int],
    epsilon_grid: Sequence[float],
    metric: str = "eucos",
    eucos_weight: float = DEFAULT_EUCOS_WEIGHT,
    omega_mode: str = "cdf",
) -> GridSearchResult:
    """Exhaustive hyper-parameter search maximizing open-set F-measure.

    Calibrates once per tail size and scores the calibration split
    (validation plus an open-set sample; fooling is never used for
    threshold selection) once per (eta, alpha). Ties resolve to the
    smallest eta, then alpha, then epsilon, so the result is independent
    of grid enumeration order.
    """
    eta_grid = sorted(set(int(e) for e in eta_grid))
    alpha_grid = sorted(set(int(a) for a in alpha_grid))
    epsilon_grid = sorted(set(float(e) for e in epsilon_grid))
    if not eta_grid or not alpha_grid or not epsilon_grid:
        raise ConfigError("grids must be non-empty")
    if len(validation) == 0 or len(openset_sample) == 0:
        raise EmptyDatasetError("grid search needs validation and open-set samples")
    labels = np.concatenate([validation.labels(), openset_sample.labels()])
    best: GridSearchResult | None = None
    for eta in eta_grid:
        model = calibrate(train, eta, metric, eucos_weight)
        for alpha in alpha_grid:
            hp = Hyperparams(alpha=alpha, omega_mode=omega_mode)
            val_table = _score_table(model, validation, "openmax", hp)
            open_table = _score_table(model, openset_sample, "openmax", hp)
            y_star = np.concatenate([val_table[0], open_table[0]])
            peak = np.concatenate([val_table[1], open_table[1]])
            for epsilon in epsilon_grid:
                score = f_measure(_counts_at(y_star, peak, labels, epsilon))
                if best is None or score > best.fmeasure:
                    best = GridSearchResult(eta, alpha, epsilon, score)
    return best
