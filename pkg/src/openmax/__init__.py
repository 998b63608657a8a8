"""Open-set recognition toolkit.

Converts closed-set classifier activation vectors into open-set decisions:
per-class Weibull tail models of distance to mean activation vectors feed
the OpenMax score revision, which adds an explicit unknown class and a
rejection rule. Includes a full evaluation harness and a seeded synthetic
benchmark generator.
"""

from .data import (
    FOOLING_LABEL,
    OPENSET_LABEL,
    PARTITIONS,
    ActivationSample,
    Dataset,
)
from .errors import (
    ArityError,
    CalibrationError,
    ConfigError,
    DataError,
    DegenerateTailError,
    DimensionError,
    EmptyClassError,
    EmptyDatasetError,
    FormatError,
    IoError,
    ModelCoverageError,
    OpenMaxError,
    SolverError,
    ZeroVectorError,
)
from .evaluation import (
    SCORERS,
    GridSearchResult,
    OpenSetCounts,
    SweepCurve,
    detection_accuracy,
    detection_curve,
    f_measure,
    grid_search,
    open_set_counts,
    threshold_sweep,
)
from .io import load_dataset, load_model, save_dataset, save_model
from .mav import (
    DEFAULT_EUCOS_WEIGHT,
    METRICS,
    ClassModel,
    class_distances,
    compute_mav,
    correct_subset,
    distance,
)
from .scoring import (
    DEFAULT_ALPHA,
    DEFAULT_ETA,
    OMEGA_MODES,
    Hyperparams,
    OpenMaxModel,
    OpenSetScores,
    Prediction,
    calibrate,
    openmax_multichannel,
    openmax_scores,
    predict,
    softmax,
    softmax_multichannel,
    softmax_threshold_predict,
)
from .synthetic import (
    EmpiricalCdf,
    SynthBenchmark,
    SynthConfig,
    empirical_cdf,
    gen_benchmark,
)
from .weibull import (
    WeibullModel,
    fit_high,
    sample_weibull,
    weibull_cdf,
    weibull_from_uniform,
)

__version__ = "0.1.0"
