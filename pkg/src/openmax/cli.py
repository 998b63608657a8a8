"""Command-line front end: synth / calibrate / predict / evaluate / grid-search.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric/solver
error. All randomness flows from --seed, so every subcommand is
deterministic given its flags and inputs, and invalid flags fail before
any file is written.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as avio
from .errors import DegenerateTailError, OpenMaxError, SolverError
from .evaluation import detection_curve, grid_search, threshold_sweep
from .mav import DEFAULT_EUCOS_WEIGHT, METRICS
from .scoring import (
    DEFAULT_ALPHA,
    DEFAULT_ETA,
    OMEGA_MODES,
    Hyperparams,
    calibrate,
    predict,
)
from .synthetic import SynthConfig, gen_benchmark

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

SWEEP_COLUMNS = "scorer,threshold,tp,fp,fn,fmeasure"
DETECTION_COLUMNS = "scorer,partition,threshold,rejection_rate"

_DEFAULT_THRESHOLDS = "0:0.98:50"


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_grid(spec: str) -> list[float]:
    """Parse 'lo:hi:n' as an inclusive linspace or a comma list of floats;
    the grid must be strictly increasing."""
    try:
        if ":" in spec:
            lo, hi, n = spec.split(":")
            values = [float(x) for x in np.linspace(float(lo), float(hi), int(n))]
        else:
            values = [float(x) for x in spec.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {spec!r}: {exc}") from exc
    if not values or any(b <= a for a, b in zip(values, values[1:])):
        raise argparse.ArgumentTypeError(f"grid {spec!r} must be strictly increasing")
    return values


def _int_grid(spec: str) -> list[int]:
    try:
        values = [int(x) for x in spec.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {spec!r}: {exc}") from exc
    if not values:
        raise argparse.ArgumentTypeError("grid is empty")
    return values


def _epsilon(value: str) -> float:
    eps = float(value)
    if not 0.0 <= eps <= 1.0:
        raise argparse.ArgumentTypeError("epsilon must lie in [0, 1]")
    return eps


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return number


def _add_format_flag(parser) -> None:
    parser.add_argument(
        "--format", choices=avio.FORMATS, default="binary", help="dataset file format"
    )


def _add_metric_flags(parser) -> None:
    parser.add_argument("--metric", choices=METRICS, default="eucos")
    parser.add_argument(
        "--eucos-weight",
        type=float,
        default=DEFAULT_EUCOS_WEIGHT,
        help="weight on the Euclidean term of the eucos distance",
    )


def _add_scoring_flags(parser) -> None:
    parser.add_argument("--alpha", type=_positive_int, default=DEFAULT_ALPHA,
                        help="number of top classes to revise")
    parser.add_argument("--epsilon", type=_epsilon, default=0.0,
                        help="uncertainty rejection threshold")
    parser.add_argument("--omega-mode", choices=OMEGA_MODES, default="cdf",
                        help="outlier weighting variant")


def build_parser() -> _Parser:
    parser = _Parser(prog="openmax", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic benchmark")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-classes", type=_positive_int, default=100)
    p.add_argument("--n-channels", type=_positive_int, default=1)
    p.add_argument("--train-per-class", type=_positive_int, default=200)
    p.add_argument("--val-per-class", type=_positive_int, default=50)
    p.add_argument("--n-openset", type=_positive_int, default=2000)
    p.add_argument("--n-fooling", type=_positive_int, default=1500)
    p.add_argument("--n-openset-classes", type=_positive_int, default=20)
    p.add_argument("--group-size", type=_positive_int, default=5)
    p.add_argument("--noise-scale", type=float, default=1.0)
    p.add_argument("--open-shift-scale", type=float, default=1.0)
    p.add_argument("--fooling-sparsity", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=42)
    _add_format_flag(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("calibrate", help="fit per-class models from a train dataset")
    p.add_argument("--train", required=True, help="train dataset path")
    p.add_argument("--model-out", required=True, help="output model path")
    p.add_argument("--eta", type=_positive_int, default=DEFAULT_ETA,
                   help="Weibull tail size")
    _add_metric_flags(p)
    _add_format_flag(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("predict", help="per-sample verdicts on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--partition", choices=("validation", "openset", "fooling"),
                   default="validation", help="partition tag for CSV inputs")
    _add_scoring_flags(p)
    _add_format_flag(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="threshold sweep and detection reports")
    p.add_argument("--model", required=True)
    p.add_argument("--validation", required=True)
    p.add_argument("--openset", required=True)
    p.add_argument("--fooling", required=True)
    p.add_argument("--thresholds", type=_float_grid, default=_DEFAULT_THRESHOLDS,
                   help="'lo:hi:n' linspace or comma list")
    p.add_argument("--sweep-csv", default="sweep.csv")
    p.add_argument("--detection-csv", default="detection.csv")
    _add_scoring_flags(p)
    _add_format_flag(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grid-search", help="select eta/alpha/epsilon by F-measure")
    p.add_argument("--train", required=True)
    p.add_argument("--validation", required=True)
    p.add_argument("--openset", required=True)
    p.add_argument("--eta-grid", type=_int_grid, default=str(DEFAULT_ETA))
    p.add_argument("--alpha-grid", type=_int_grid, default=str(DEFAULT_ALPHA))
    p.add_argument("--epsilon-grid", type=_float_grid, default="0:0.95:20")
    p.add_argument("--omega-mode", choices=OMEGA_MODES, default="cdf")
    _add_metric_flags(p)
    _add_format_flag(p)
    p.set_defaults(func=cmd_grid_search)

    return parser


def cmd_synth(args) -> int:
    config = SynthConfig(
        n_classes=args.n_classes,
        n_channels=args.n_channels,
        train_per_class=args.train_per_class,
        val_per_class=args.val_per_class,
        n_openset=args.n_openset,
        n_fooling=args.n_fooling,
        n_openset_classes=args.n_openset_classes,
        group_size=args.group_size,
        noise_scale=args.noise_scale,
        open_shift_scale=args.open_shift_scale,
        fooling_sparsity=args.fooling_sparsity,
        seed=args.seed,
    )
    benchmark = gen_benchmark(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = "avec" if args.format == "binary" else "csv"
    for name in ("train", "validation", "openset", "fooling"):
        path = out_dir / f"{name}.{ext}"
        avio.save_dataset(getattr(benchmark, name), path, args.format)
        print(f"wrote {path}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    train = avio.load_dataset(args.train, args.format, partition="train")
    model = calibrate(train, args.eta, args.metric, args.eucos_weight)
    avio.save_model(model, args.model_out)

    shapes = [wb.shape for cm in model.class_models for wb in cm.weibull]
    scales = [wb.scale for cm in model.class_models for wb in cm.weibull]
    rows = [
        ("metric", model.metric),
        ("eta", str(model.eta)),
        ("classes", str(model.n_classes)),
        ("fitted", str(len(model.class_models))),
        ("skipped", str(len(model.skipped))),
        ("shape range", f"[{min(shapes):.4g}, {max(shapes):.4g}]"),
        ("scale range", f"[{min(scales):.4g}, {max(scales):.4g}]"),
    ]
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"{name:<{width}}  {value}")
    for class_id, reason in model.skipped:
        print(f"skipped class {class_id}: {reason}")
    print(f"wrote {args.model_out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = avio.load_model(args.model)
    dataset = avio.load_dataset(args.data, args.format, partition=args.partition)
    hp = Hyperparams(alpha=args.alpha, epsilon=args.epsilon, omega_mode=args.omega_mode)
    for i, sample in enumerate(dataset.samples):
        result = predict(sample, model, hp)
        verdict = str(result.class_id) if result.verdict == "known" else result.verdict.upper()
        print(f"{i},{verdict},{result.score:.9g}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = avio.load_model(args.model)
    validation = avio.load_dataset(args.validation, args.format, partition="validation")
    openset = avio.load_dataset(args.openset, args.format, partition="openset")
    fooling = avio.load_dataset(args.fooling, args.format, partition="fooling")
    hp = Hyperparams(alpha=args.alpha, epsilon=args.epsilon, omega_mode=args.omega_mode)

    with open(args.sweep_csv, "w") as fh:
        fh.write(SWEEP_COLUMNS + "\n")
        peaks = {}
        for scorer in ("openmax", "softmax_threshold"):
            curve = threshold_sweep(
                model, validation, openset, fooling, scorer, args.thresholds, hp
            )
            peaks[scorer] = max(curve.fmeasures)
            for eps, f, c in zip(curve.thresholds, curve.fmeasures, curve.counts):
                fh.write(f"{scorer},{eps:.9g},{c.tp},{c.fp},{c.fn},{f:.9g}\n")

    with open(args.detection_csv, "w") as fh:
        fh.write(DETECTION_COLUMNS + "\n")
        for scorer in ("openmax", "softmax_threshold"):
            for name, part in (("openset", openset), ("fooling", fooling)):
                rates = detection_curve(model, part, scorer, args.thresholds, hp)
                for eps, rate in zip(args.thresholds, rates):
                    fh.write(f"{scorer},{name},{eps:.9g},{rate:.9g}\n")

    for scorer, peak in peaks.items():
        print(f"peak fmeasure {scorer}: {peak:.6f}")
    print(f"wrote {args.sweep_csv} and {args.detection_csv}")
    return EXIT_OK


def cmd_grid_search(args) -> int:
    train = avio.load_dataset(args.train, args.format, partition="train")
    validation = avio.load_dataset(args.validation, args.format, partition="validation")
    openset = avio.load_dataset(args.openset, args.format, partition="openset")
    best = grid_search(
        train,
        validation,
        openset,
        args.eta_grid,
        args.alpha_grid,
        args.epsilon_grid,
        args.metric,
        args.eucos_weight,
        args.omega_mode,
    )
    print(f"eta={best.eta} alpha={best.alpha} epsilon={best.epsilon:.9g} "
          f"fmeasure={best.fmeasure:.6f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SolverError, DegenerateTailError) as exc:
        print(f"openmax: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OpenMaxError, OSError) as exc:
        print(f"openmax: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
