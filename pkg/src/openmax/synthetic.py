"""Seeded synthetic activation-vector benchmark.

Emulates, at desk scale, the four input regimes an open-set evaluation
needs. Known classes live in related groups: each class profile has a
dominant activation at its own index and elevated activations for its
group, so closed-set samples carry the consistent related-class pattern a
real network produces. Open-set samples come from held-out phantom
classes whose profiles anchor on a known class but break its group
pattern. Fooling vectors are a single large spike with the remaining
coordinates suppressed toward the minimum, which makes the softmax
confident while the activation pattern sits far from every class model.

All draws derive from the config seed, so generation is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .data import FOOLING_LABEL, OPENSET_LABEL, ActivationSample, Dataset
from .errors import ConfigError, DataError
from .mav import class_distances, compute_mav, correct_subset

_PEAK = 12.0
_RELATED = 2.0

# Closed-set noise is a Gaussian scale mixture: a small fraction of samples
# (hard examples) carry inflated noise, giving the class distance
# distributions the heavy right tail real networks produce.
_HEAVY_FRACTION = 0.05
_HEAVY_SCALE = 1.6

_FOOL_SPIKE_RANGE = (1.05, 1.3)  # spike height as a multiple of _PEAK
_FOOL_FLOOR = -2.0

# Phantom (held-out class) profiles anchor on a known class but lack its
# related-group pattern, carrying spurious relatives from other groups
# instead. Strong-anchor phantoms score as confidently as real inputs and
# sit just beyond the training distance tail, so only distance-based
# rejection catches them; weak-anchor phantoms are also rejectable by
# probability thresholding.
_STRONG_FRACTION = 0.8
_STRONG_ANCHOR_RANGE = (0.99, 1.0)
_WEAK_ANCHOR_RANGE = (0.45, 0.9)
_PHANTOM_SPURIOUS = 3


class SynthBenchmark(NamedTuple):
    train: Dataset
    validation: Dataset
    openset: Dataset
    fooling: Dataset


@dataclass(frozen=True)
class SynthConfig:
    """Benchmark shape and randomness knobs.

    The activation dimension equals ``n_classes``. ``open_shift_scale``
    interpolates phantom profiles between their anchor class (0, inputs
    indistinguishable from known classes) and the fully degraded pattern
    (1). ``fooling_sparsity`` is the fraction of non-spike coordinates
    pushed to the suppression floor. ``noise_scale`` 0 is allowed as the
    degenerate limit where every sample equals its profile exactly.
    """

    n_classes: int = 100
    n_channels: int = 1
    train_per_class: int = 200
    val_per_class: int = 50
    n_openset: int = 2000
    n_fooling: int = 1500
    n_openset_classes: int = 20
    group_size: int = 5
    noise_scale: float = 1.0
    open_shift_scale: float = 1.0
    fooling_sparsity: float = 0.95
    seed: int = 42

    def __post_init__(self):
        counts = (
            self.n_classes,
            self.n_channels,
            self.train_per_class,
            self.val_per_class,
            self.n_openset,
            self.n_fooling,
            self.n_openset_classes,
            self.group_size,
        )
        if any(int(c) < 1 for c in counts):
            raise ConfigError("all counts must be at least 1")
        if self.n_classes < 2:
            raise ConfigError("need at least 2 classes")
        if self.group_size > self.n_classes:
            raise ConfigError("group size cannot exceed the number of classes")
        if self.noise_scale < 0.0:
            raise ConfigError("noise scale cannot be negative")
        if not 0.0 < self.fooling_sparsity <= 1.0:
            raise ConfigError("fooling sparsity must lie in (0, 1]")
        if not 0.0 <= self.open_shift_scale <= 1.0:
            raise ConfigError("open-set shift scale must lie in [0, 1]")


def _class_profile(class_id: int, n_classes: int, group_size: int) -> np.ndarray:
    profile = np.zeros(n_classes)
    start = (class_id // group_size) * group_size
    profile[start : min(start + group_size, n_classes)] = _RELATED
    profile[class_id] = _PEAK
    return profile


def _group_members(class_id: int, n_classes: int, group_size: int) -> np.ndarray:
    start = (class_id // group_size) * group_size
    members = np.arange(start, min(start + group_size, n_classes))
    return members[members != class_id]


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, *key)))


def _phantom_profile(index: int, config: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Profile of one held-out class, anchored on a known class."""
    n = config.n_classes
    anchor = int(rng.integers(n))
    group = _group_members(anchor, n, config.group_size)
    strong = index < round(_STRONG_FRACTION * config.n_openset_classes)
    strength = rng.uniform(*(_STRONG_ANCHOR_RANGE if strong else _WEAK_ANCHOR_RANGE))

    profile = np.zeros(n)
    profile[anchor] = _PEAK * strength
    outside = np.setdiff1d(np.arange(n), np.append(group, anchor))
    if outside.size:
        spurious = rng.choice(outside, size=min(_PHANTOM_SPURIOUS, outside.size), replace=False)
        profile[spurious] = _RELATED

    anchor_profile = _class_profile(anchor, n, config.group_size)
    return anchor_profile + config.open_shift_scale * (profile - anchor_profile)


def gen_benchmark(config: SynthConfig = SynthConfig()) -> SynthBenchmark:
    """Generate the four benchmark partitions, deterministically per seed.

    Train and validation share the known classes; open-set samples come
    from phantom classes absent from the model and carry label -1;
    fooling vectors carry label -2. The generator asserts that every
    fooling vector sits farther (eucos) from its argmax class's MAV than
    the 95th percentile of that class's training distances.
    """
    n, c = config.n_classes, config.n_channels
    shape = (c, n)

    train, validation = [], []
    for j in range(n):
        rng = _stream(config.seed, 0, j)
        profile = _class_profile(j, n, config.group_size)
        total = config.train_per_class + config.val_per_class
        noise = rng.standard_normal((total, c, n))
        heavy = rng.random(total) < _HEAVY_FRACTION
        noise[heavy] *= _HEAVY_SCALE
        for i in range(total):
            sample = ActivationSample(j, profile + config.noise_scale * noise[i])
            (train if i < config.train_per_class else validation).append(sample)

    openset = []
    base, extra = divmod(config.n_openset, config.n_openset_classes)
    for h in range(config.n_openset_classes):
        rng = _stream(config.seed, 1, h)
        profile = _phantom_profile(h, config, rng)
        count = base + (1 if h < extra else 0)
        noise = rng.standard_normal((count, c, n))
        for i in range(count):
            openset.append(
                ActivationSample(OPENSET_LABEL, profile + config.noise_scale * noise[i])
            )

    fooling = []
    rng = _stream(config.seed, 2)
    for i in range(config.n_fooling):
        spike_class = i % n
        vec = np.zeros(shape)
        suppressed = rng.random(shape) < config.fooling_sparsity
        vec[suppressed] = _FOOL_FLOOR
        vec += 0.1 * config.noise_scale * rng.standard_normal(shape)
        vec[:, spike_class] = _PEAK * rng.uniform(*_FOOL_SPIKE_RANGE)
        fooling.append(ActivationSample(FOOLING_LABEL, vec))

    benchmark = SynthBenchmark(
        train=Dataset(n, c, tuple(train), "train"),
        validation=Dataset(n, c, tuple(validation), "validation"),
        openset=Dataset(n, c, tuple(openset), "openset"),
        fooling=Dataset(n, c, tuple(fooling), "fooling"),
    )
    _check_fooling_margin(benchmark)
    return benchmark


def _check_fooling_margin(benchmark: SynthBenchmark) -> None:
    """Constructed property: every fooling vector is farther (eucos) from
    its argmax class's MAV than the 95th percentile of that class's
    training distances, on every channel."""
    per_class = correct_subset(benchmark.train)
    usable = {j for j, samples in per_class.items() if samples}
    mavs = {j: compute_mav(per_class[j]) for j in usable}
    train_dists = class_distances(per_class, mavs, "eucos")
    p95 = {j: np.percentile(train_dists[j], 95.0, axis=1) for j in usable}

    for i, sample in enumerate(benchmark.fooling.samples):
        acts = sample.activations.astype(np.float64)
        argmax_class = int(np.argmax(acts.mean(axis=0)))
        if argmax_class not in usable:
            continue
        one = class_distances(
            {argmax_class: [sample]}, {argmax_class: mavs[argmax_class]}, "eucos"
        )[argmax_class][:, 0]
        if not np.all(one > p95[argmax_class]):
            raise DataError(
                f"fooling vector {i} is not beyond the 95th-percentile distance "
                f"of class {argmax_class}"
            )


class EmpiricalCdf:
    """Right-continuous empirical distribution function of a sample."""

    def __init__(self, values):
        arr = np.sort(np.asarray(values, dtype=np.float64).ravel())
        if arr.size == 0:
            raise ConfigError("empirical CDF needs at least one value")
        if not np.all(np.isfinite(arr)):
            raise DataError("non-finite value in empirical CDF input")
        self._sorted = arr

    def __call__(self, q):
        arr = np.asarray(q, dtype=np.float64)
        out = np.searchsorted(self._sorted, arr, side="right") / self._sorted.size
        if arr.ndim == 0:
            return float(out)
        return out


def empirical_cdf(values) -> EmpiricalCdf:
    """Step-function estimate of the distribution of ``values``; the
    verification oracle for fitted tails."""
    return EmpiricalCdf(values)
