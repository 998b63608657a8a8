"""Bit-exact persistence for datasets and calibrated models.

Dataset binary layout (little-endian throughout)::

    magic "AVEC" | u32 version=1 | u32 N | u32 C | u32 count | u8 partition
    then per sample: i32 label, C*N float32 activations (channel-major)

The fixed stride allows memory-mapped scans of large dumps. The CSV form
(header ``label,c{c}_v{j}``, one sample per row, values at 9 significant
digits) is for small, human-inspectable fixtures; it carries no partition
tag, so loading CSV takes the partition as an argument.

Model binary layout::

    magic "OMAX" | u32 version=1 | u32 N | u32 C | u32 eta
    u8 metric | f64 eucos_weight | u32 model count
    then per class model: i32 class_id, u32 n_support,
        C*N float64 MAV (channel-major), C * (f64 shift, f64 shape, f64 scale)

Calibration skip diagnostics are not persisted.
"""

from __future__ import annotations

import csv
import re
import struct

import numpy as np

from .data import PARTITIONS, ActivationSample, Dataset
from .errors import DataError, DimensionError, FormatError, IoError
from .mav import METRICS, ClassModel
from .scoring import OpenMaxModel
from .weibull import WeibullModel

DATASET_MAGIC = b"AVEC"
DATASET_VERSION = 1
MODEL_MAGIC = b"OMAX"
MODEL_VERSION = 1

FORMATS = ("binary", "csv")

_DATASET_HEADER = struct.Struct("<4sIIIIB")
_MODEL_HEADER = struct.Struct("<4sIIIIBdI")
_CLASS_HEADER = struct.Struct("<iI")
_WEIBULL_TRIPLE = struct.Struct("<ddd")

_HEADER_COL = re.compile(r"^c(\d+)_v(\d+)$")


def _read_bytes(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def _open_write(path, mode: str):
    try:
        return open(path, mode, newline="" if "b" not in mode else None)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _validate_finite(dataset: Dataset) -> None:
    # Re-checked at save time: arrays may have been mutated through views.
    for i, sample in enumerate(dataset.samples):
        if not np.all(np.isfinite(sample.activations)):
            raise DataError(f"sample {i} contains a non-finite activation")


def save_dataset(dataset: Dataset, path, format: str = "binary") -> None:
    """Write a dataset; binary round-trips bit-exactly, CSV to 9
    significant digits (exact for float32 payloads)."""
    if format not in FORMATS:
        raise FormatError(f"unknown format {format!r}")
    _validate_finite(dataset)
    if format == "binary":
        _save_dataset_binary(dataset, path)
    else:
        _save_dataset_csv(dataset, path)


def _save_dataset_binary(dataset: Dataset, path) -> None:
    header = _DATASET_HEADER.pack(
        DATASET_MAGIC,
        DATASET_VERSION,
        dataset.n_classes,
        dataset.n_channels,
        len(dataset),
        PARTITIONS.index(dataset.partition),
    )
    with _open_write(path, "wb") as fh:
        fh.write(header)
        for sample in dataset.samples:
            fh.write(struct.pack("<i", sample.label))
            fh.write(sample.activations.astype("<f4", copy=False).tobytes(order="C"))


def _save_dataset_csv(dataset: Dataset, path) -> None:
    columns = ["label"] + [
        f"c{c}_v{j}" for c in range(dataset.n_channels) for j in range(dataset.n_classes)
    ]
    with _open_write(path, "w") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for sample in dataset.samples:
            row = [str(sample.label)]
            row.extend(f"{float(x):.9g}" for x in sample.activations.ravel(order="C"))
            writer.writerow(row)


def load_dataset(path, format: str = "binary", partition: str = "train") -> Dataset:
    """Load a dataset, preserving sample and channel order exactly.

    ``partition`` applies to CSV only; binary files carry their own tag.
    """
    if format not in FORMATS:
        raise FormatError(f"unknown format {format!r}")
    if format == "binary":
        return _load_dataset_binary(path)
    return _load_dataset_csv(path, partition)


def _load_dataset_binary(path) -> Dataset:
    blob = _read_bytes(path)
    if len(blob) < _DATASET_HEADER.size:
        raise FormatError("file too short for a dataset header")
    magic, version, n_classes, n_channels, count, tag = _DATASET_HEADER.unpack_from(blob)
    if magic != DATASET_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != DATASET_VERSION:
        raise FormatError(f"unsupported dataset version {version}")
    if tag >= len(PARTITIONS):
        raise FormatError(f"unknown partition tag {tag}")
    stride = 4 + 4 * n_channels * n_classes
    payload = blob[_DATASET_HEADER.size :]
    if len(payload) != count * stride:
        raise DimensionError(
            f"header declares {count} samples ({count * stride} bytes), "
            f"payload holds {len(payload)} bytes"
        )
    record = np.dtype([("label", "<i4"), ("acts", "<f4", (n_channels, n_classes))])
    rows = np.frombuffer(payload, dtype=record, count=count)
    samples = tuple(ActivationSample(int(r["label"]), r["acts"]) for r in rows)
    return Dataset(n_classes, n_channels, samples, PARTITIONS[tag])


def _load_dataset_csv(path, partition: str) -> Dataset:
    try:
        with open(path, "r", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise FormatError("empty CSV file") from None
            rows = list(reader)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    n_classes, n_channels = _parse_csv_header(header)
    samples = []
    for i, row in enumerate(rows):
        if len(row) != 1 + n_channels * n_classes:
            raise DimensionError(
                f"row {i} has {len(row)} fields, header declares "
                f"{1 + n_channels * n_classes}"
            )
        try:
            label = int(row[0])
            values = np.array([float(x) for x in row[1:]], dtype=np.float32)
        except ValueError as exc:
            raise FormatError(f"row {i}: {exc}") from exc
        samples.append(ActivationSample(label, values.reshape(n_channels, n_classes)))
    return Dataset(n_classes, n_channels, tuple(samples), partition)


def _parse_csv_header(header: list[str]) -> tuple[int, int]:
    if not header or header[0] != "label":
        raise FormatError("CSV header must start with 'label'")
    pairs = []
    for col in header[1:]:
        match = _HEADER_COL.match(col)
        if not match:
            raise FormatError(f"unexpected CSV column {col!r}")
        pairs.append((int(match.group(1)), int(match.group(2))))
    if not pairs:
        raise FormatError("CSV header declares no activation columns")
    n_channels = pairs[-1][0] + 1
    n_classes = pairs[-1][1] + 1
    expected = [(c, j) for c in range(n_channels) for j in range(n_classes)]
    if pairs != expected:
        raise FormatError("CSV activation columns are not in channel-major order")
    if n_classes < 2:
        raise FormatError("CSV header declares fewer than two classes")
    return n_classes, n_channels


def save_model(model: OpenMaxModel, path) -> None:
    """Write a calibrated model; round-trips all parameters bit-exactly."""
    header = _MODEL_HEADER.pack(
        MODEL_MAGIC,
        MODEL_VERSION,
        model.n_classes,
        model.n_channels,
        model.eta,
        METRICS.index(model.metric),
        model.eucos_weight,
        len(model.class_models),
    )
    with _open_write(path, "wb") as fh:
        fh.write(header)
        for cm in model.class_models:
            fh.write(_CLASS_HEADER.pack(cm.class_id, cm.n_support))
            fh.write(cm.mav.astype("<f8", copy=False).tobytes(order="C"))
            for wb in cm.weibull:
                fh.write(_WEIBULL_TRIPLE.pack(wb.shift, wb.shape, wb.scale))


def load_model(path) -> OpenMaxModel:
    blob = _read_bytes(path)
    if len(blob) < _MODEL_HEADER.size:
        raise FormatError("file too short for a model header")
    magic, version, n_classes, n_channels, eta, metric_tag, eucos_weight, n_models = (
        _MODEL_HEADER.unpack_from(blob)
    )
    if magic != MODEL_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model version {version}")
    if metric_tag >= len(METRICS):
        raise FormatError(f"unknown metric tag {metric_tag}")

    mav_bytes = 8 * n_channels * n_classes
    stride = _CLASS_HEADER.size + mav_bytes + n_channels * _WEIBULL_TRIPLE.size
    payload = blob[_MODEL_HEADER.size :]
    if len(payload) != n_models * stride:
        raise FormatError(
            f"header declares {n_models} class models ({n_models * stride} bytes), "
            f"payload holds {len(payload)} bytes"
        )
    class_models = []
    offset = _MODEL_HEADER.size
    for _ in range(n_models):
        class_id, n_support = _CLASS_HEADER.unpack_from(blob, offset)
        offset += _CLASS_HEADER.size
        mav = np.frombuffer(blob, dtype="<f8", count=n_channels * n_classes, offset=offset)
        mav = mav.reshape(n_channels, n_classes)
        offset += mav_bytes
        weibulls = []
        for _ in range(n_channels):
            shift, shape, scale = _WEIBULL_TRIPLE.unpack_from(blob, offset)
            offset += _WEIBULL_TRIPLE.size
            weibulls.append(WeibullModel(shift=shift, shape=shape, scale=scale))
        class_models.append(ClassModel(class_id, mav, tuple(weibulls), n_support))
    return OpenMaxModel(
        n_classes=n_classes,
        n_channels=n_channels,
        eta=eta,
        metric=METRICS[metric_tag],
        eucos_weight=eucos_weight,
        class_models=tuple(class_models),
    )
