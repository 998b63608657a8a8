"""SoftMax baseline and OpenMax open-set scoring.

Calibration builds one :class:`~openmax.mav.ClassModel` per class from
correctly classified training samples. Scoring then revises the top-alpha
activations of an input by Weibull outlier weights, routes the removed
activation mass to a synthetic unknown class at index 0, and renormalizes
over the resulting N+1 scores, so an input far from every class model ends
up with most of its probability on "unknown".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ActivationSample, Dataset
from .errors import (
    CalibrationError,
    ConfigError,
    DegenerateTailError,
    DimensionError,
    ModelCoverageError,
)
from .mav import (
    DEFAULT_EUCOS_WEIGHT,
    METRICS,
    ClassModel,
    class_distances,
    compute_mav,
    correct_subset,
    distance,
)
from .weibull import fit_high, weibull_cdf

DEFAULT_ETA = 20
DEFAULT_ALPHA = 10

#: "cdf" penalizes large distances (outliers lose activation); "survival"
#: is the alternative weighting that penalizes small distances instead,
#: kept selectable for comparison runs.
OMEGA_MODES = ("cdf", "survival")

SKIP_INSUFFICIENT = "insufficient_support"
SKIP_DEGENERATE = "degenerate_tail"


@dataclass(frozen=True)
class Hyperparams:
    """Scoring-time knobs: how many top classes to revise (alpha), the
    uncertainty-rejection threshold (epsilon), and the outlier weighting
    variant."""

    alpha: int = DEFAULT_ALPHA
    epsilon: float = 0.0
    omega_mode: str = "cdf"

    def __post_init__(self):
        alpha = int(self.alpha)
        epsilon = float(self.epsilon)
        if alpha < 1:
            raise ConfigError("alpha must be at least 1")
        if not 0.0 <= epsilon <= 1.0:
            raise ConfigError("epsilon must lie in [0, 1]")
        if self.omega_mode not in OMEGA_MODES:
            raise ConfigError(f"omega_mode must be one of {OMEGA_MODES}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "epsilon", epsilon)


@dataclass(frozen=True)
class OpenMaxModel:
    """Full calibration result: class models plus the configuration they
    were fitted under. Immutable; scoring is safe to parallelize."""

    n_classes: int
    n_channels: int
    eta: int
    metric: str
    eucos_weight: float
    class_models: tuple[ClassModel, ...]
    skipped: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ConfigError(f"unknown metric {self.metric!r}")
        if int(self.eta) < 2:
            raise ConfigError("eta must be at least 2")
        class_models = tuple(self.class_models)
        by_id = {}
        for cm in class_models:
            if cm.mav.shape != (self.n_channels, self.n_classes):
                raise DimensionError(
                    f"class {cm.class_id} mav shape {cm.mav.shape} does not match "
                    f"model ({self.n_channels}, {self.n_classes})"
                )
            if not 0 <= cm.class_id < self.n_classes:
                raise ConfigError(f"class id {cm.class_id} out of range")
            if cm.class_id in by_id:
                raise ConfigError(f"duplicate class model for class {cm.class_id}")
            by_id[cm.class_id] = cm
        object.__setattr__(self, "n_classes", int(self.n_classes))
        object.__setattr__(self, "n_channels", int(self.n_channels))
        object.__setattr__(self, "eta", int(self.eta))
        object.__setattr__(self, "eucos_weight", float(self.eucos_weight))
        object.__setattr__(self, "class_models", class_models)
        object.__setattr__(self, "skipped", tuple(self.skipped))
        object.__setattr__(self, "_by_id", by_id)

    def model_for(self, class_id: int) -> ClassModel | None:
        return self._by_id.get(class_id)


@dataclass(frozen=True)
class OpenSetScores:
    """Scoring result over N+1 classes, index 0 = unknown.

    ``probs`` always sums to 1; for single-channel scores it is exactly
    the softmax of ``(unknown_activation, revised_av)``, for channel
    averages it is the renormalized mean of the per-channel vectors.
    """

    probs: np.ndarray
    revised_av: np.ndarray
    unknown_activation: float

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        revised = np.asarray(self.revised_av, dtype=np.float64)
        probs.setflags(write=False)
        revised.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "revised_av", revised)
        object.__setattr__(self, "unknown_activation", float(self.unknown_activation))


@dataclass(frozen=True)
class Prediction:
    """Outcome of the rejection rule: a known class id, or a rejection as
    unknown (argmax landed on index 0) or uncertain (peak below epsilon)."""

    verdict: str  # "known" | "unknown" | "uncertain"
    class_id: int | None
    score: float


def softmax(av) -> np.ndarray:
    """Overflow-safe softmax: subtracts the max before exponentiating."""
    v = np.asarray(av, dtype=np.float64)
    e = np.exp(v - v.max())
    return e / e.sum()


def calibrate(
    train: Dataset,
    eta: int = DEFAULT_ETA,
    metric: str = "eucos",
    eucos_weight: float = DEFAULT_EUCOS_WEIGHT,
) -> OpenMaxModel:
    """Fit per-class MAVs and Weibull tail models from a train dataset.

    For every class with at least ``eta`` correctly classified samples,
    computes the per-channel MAV and fits a Weibull model to the ``eta``
    largest distances on each channel. Classes with too few correct
    samples, or whose tail has no spread, are skipped and recorded in the
    returned model's ``skipped`` list. Deterministic given the dataset and
    configuration.

    Raises CalibrationError when every class is skipped.
    """
    eta = int(eta)
    if eta < 2:
        raise ConfigError("eta must be at least 2")
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}")
    per_class = correct_subset(train)
    class_models = []
    skipped = []
    for class_id in range(train.n_classes):
        samples = per_class[class_id]
        if len(samples) < eta:
            skipped.append((class_id, SKIP_INSUFFICIENT))
            continue
        mav = compute_mav(samples)
        dists = class_distances({class_id: samples}, {class_id: mav}, metric, eucos_weight)
        try:
            weibulls = tuple(
                fit_high(dists[class_id][c], eta) for c in range(train.n_channels)
            )
        except DegenerateTailError:
            skipped.append((class_id, SKIP_DEGENERATE))
            continue
        class_models.append(ClassModel(class_id, mav, weibulls, len(samples)))
    if not class_models:
        raise CalibrationError("no class had enough well-spread correct samples")
    return OpenMaxModel(
        n_classes=train.n_classes,
        n_channels=train.n_channels,
        eta=eta,
        metric=metric,
        eucos_weight=eucos_weight,
        class_models=tuple(class_models),
        skipped=tuple(skipped),
    )


def openmax_scores(
    av,
    model: OpenMaxModel,
    channel: int = 0,
    hp: Hyperparams = Hyperparams(),
) -> OpenSetScores:
    """Score one activation vector on one channel.

    Ranks classes by activation (ties to the lowest index), then for rank
    i = 1..alpha scales class s(i)'s activation by

        omega = 1 - ((alpha - i) / alpha) * cdf(distance(av, mav_s(i)))

    so nearer-top classes lose more activation the farther the input sits
    from their class model. The removed mass
    ``sum(av * (1 - omega))`` becomes the unknown activation at index 0,
    and the probabilities are the softmax over the N+1 values. When every
    top-alpha distance falls below the fitted tail, all weights are 1 and
    the result is exactly the softmax over (0, av).
    """
    v = np.asarray(av, dtype=np.float64).ravel()
    n = model.n_classes
    if v.size != n:
        raise DimensionError(f"activation vector has {v.size} entries, model expects {n}")
    if hp.alpha > n:
        raise ConfigError(f"alpha {hp.alpha} exceeds {n} classes")
    if not 0 <= channel < model.n_channels:
        raise ConfigError(f"channel {channel} out of range for {model.n_channels} channels")

    order = np.argsort(-v, kind="stable")
    omega = np.ones(n)
    for rank, class_id in enumerate(order[: hp.alpha], start=1):
        class_id = int(class_id)
        cm = model.model_for(class_id)
        if cm is None:
            raise ModelCoverageError(f"no class model for top-{rank} class {class_id}")
        d = distance(v, cm.mav[channel], model.metric, model.eucos_weight)
        outlier_prob = weibull_cdf(d, cm.weibull[channel])
        if hp.omega_mode == "survival":
            outlier_prob = 1.0 - outlier_prob
        omega[class_id] = 1.0 - ((hp.alpha - rank) / hp.alpha) * outlier_prob

    revised = v * omega
    unknown = float(np.dot(v, 1.0 - omega))
    probs = softmax(np.concatenate(([unknown], revised)))
    return OpenSetScores(probs=probs, revised_av=revised, unknown_activation=unknown)


def openmax_multichannel(
    sample: ActivationSample,
    model: OpenMaxModel,
    hp: Hyperparams = Hyperparams(),
) -> OpenSetScores:
    """Channel-averaged scores for a multichannel sample.

    Scores each channel independently, then takes the arithmetic mean of
    the per-channel probability vectors, renormalized to sum 1. The
    revised activations and unknown activation are likewise channel means.
    """
    if sample.n_channels != model.n_channels:
        raise DimensionError(
            f"sample has {sample.n_channels} channels, model expects {model.n_channels}"
        )
    per_channel = [
        openmax_scores(sample.activations[c], model, c, hp)
        for c in range(model.n_channels)
    ]
    probs = np.mean([s.probs for s in per_channel], axis=0)
    probs = probs / probs.sum()
    revised = np.mean([s.revised_av for s in per_channel], axis=0)
    unknown = float(np.mean([s.unknown_activation for s in per_channel]))
    return OpenSetScores(probs=probs, revised_av=revised, unknown_activation=unknown)


def softmax_multichannel(sample: ActivationSample) -> np.ndarray:
    """Channel-averaged softmax probabilities (length N, no unknown class)."""
    probs = np.mean(
        [softmax(sample.activations[c].astype(np.float64)) for c in range(sample.n_channels)],
        axis=0,
    )
    return probs / probs.sum()


def predict(
    sample: ActivationSample,
    model: OpenMaxModel,
    hp: Hyperparams = Hyperparams(),
) -> Prediction:
    """Apply the rejection rule to channel-averaged scores.

    The argmax over the N+1 probabilities picks the winner (ties to the
    lowest index, so unknown wins ties). Index 0 rejects as unknown; a
    peak below ``hp.epsilon`` rejects as uncertain; anything else returns
    the known class id.
    """
    scores = openmax_multichannel(sample, model, hp)
    top = int(np.argmax(scores.probs))
    peak = float(scores.probs[top])
    if top == 0:
        return Prediction("unknown", None, peak)
    if peak < hp.epsilon:
        return Prediction("uncertain", None, peak)
    return Prediction("known", top - 1, peak)


def softmax_threshold_predict(sample: ActivationSample, epsilon: float = 0.0) -> Prediction:
    """Baseline: channel-averaged softmax with uncertainty thresholding.

    Rejects as uncertain when the peak probability falls below
    ``epsilon``; epsilon = 0 reproduces the base closed-set decision.
    """
    probs = softmax_multichannel(sample)
    top = int(np.argmax(probs))
    peak = float(probs[top])
    if peak < epsilon:
        return Prediction("uncertain", None, peak)
    return Prediction("known", top, peak)
