"""Spiral dataset generation, external dataset ingestion, splits, minibatching.

The two-class spiral draws, per point, t ~ U(0,1) and places the point at

    x = 2 sqrt(t) cos(8 sqrt(t) pi + c*pi) + sigma*N(0,1)
    y = 2 sqrt(t) sin(8 sqrt(t) pi + c*pi) + sigma*N(0,1)

with c the class label; with sigma = 0 every point satisfies x^2 + y^2 = 4t.
The 8*pi trig argument is fixed (it is what makes the spiral tightly wound);
only counts, noise level and seed are configurable.

File formats accepted: the de-facto IDX format (big-endian magic, dims,
payload; ubyte pixels are scaled to [0, 1]) and CSV with a header row and a
named integer label column.  Both are documented in the README.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import Batch
from .numerics import make_rng

__all__ = [
    "Dataset",
    "SpiralSpec",
    "IdxFormatError",
    "CsvFormatError",
    "spiral_generate",
    "minibatch_sample",
    "read_idx",
    "load_idx",
    "load_csv",
    "train_test_split",
]

SPIRAL_ANGLE_SCALE = 8.0 * np.pi  # frozen turn parameterization


class IdxFormatError(ValueError):
    """File is not a well-formed IDX payload."""


class CsvFormatError(ValueError):
    """CSV file is missing data or the declared label column."""


@dataclass
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError("inputs and labels row counts disagree")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValueError("label values must lie in [0, class_count)")

    def __len__(self) -> int:
        return self.inputs.shape[0]


@dataclass
class SpiralSpec:
    n_train: int = 500
    n_test: int = 1000
    noise_sigma: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("counts must be positive")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be nonnegative")


def _spiral_class(n: int, label: int, sigma: float, rng) -> np.ndarray:
    # draw order frozen: t, then x noise, then y noise
    t = rng.random(n)
    radius = 2.0 * np.sqrt(t)
    angle = SPIRAL_ANGLE_SCALE * np.sqrt(t) + np.pi * label
    x = radius * np.cos(angle)
    y = radius * np.sin(angle)
    if sigma > 0.0:
        x = x + sigma * rng.standard_normal(n)
        y = y + sigma * rng.standard_normal(n)
    return np.column_stack([x, y])


def _spiral_dataset(n: int, sigma: float, rng) -> Dataset:
    n0 = (n + 1) // 2  # class balance: |n0 - n1| <= 1
    n1 = n - n0
    pts = [_spiral_class(n0, 0, sigma, rng)]
    labels = [np.zeros(n0, dtype=np.int64)]
    if n1:
        pts.append(_spiral_class(n1, 1, sigma, rng))
        labels.append(np.ones(n1, dtype=np.int64))
    return Dataset(np.vstack(pts), np.concatenate(labels), class_count=2)


def spiral_generate(spec: SpiralSpec) -> tuple[Dataset, Dataset]:
    """Balanced train and test spirals, deterministic in the spec seed."""
    rng = make_rng(spec.seed)
    train = _spiral_dataset(spec.n_train, spec.noise_sigma, rng)
    test = _spiral_dataset(spec.n_test, spec.noise_sigma, rng)
    return train, test


def minibatch_sample(ds: Dataset, fraction_or_size, rng) -> Batch:
    """Uniform draw without replacement; an int is a size, a float a fraction."""
    n = len(ds)
    if isinstance(fraction_or_size, (bool,)):
        raise ValueError("batch size must be an int or float")
    if isinstance(fraction_or_size, (int, np.integer)):
        size = int(fraction_or_size)
    else:
        size = int(round(float(fraction_or_size) * n))
    if size < 1 or size > n:
        raise ValueError(f"batch size {size} out of range for dataset of {n}")
    idx = rng.choice(n, size=size, replace=False)
    return Batch(ds.inputs[idx], ds.labels[idx])


_IDX_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}


def read_idx(path) -> np.ndarray:
    """Parse one IDX file into an array (native byte order, original dtype kind)."""
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise IdxFormatError(f"{path}: truncated header")
    zero, dtype_code, ndim = struct.unpack(">HBB", raw[:4])
    if zero != 0:
        raise IdxFormatError(f"{path}: bad magic prefix 0x{zero:04x} (expected 0x0000)")
    if dtype_code not in _IDX_DTYPES:
        raise IdxFormatError(f"{path}: unknown dtype code 0x{dtype_code:02x}")
    if ndim < 1:
        raise IdxFormatError(f"{path}: dimension count must be >= 1")
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise IdxFormatError(f"{path}: truncated dimension header")
    dims = struct.unpack(f">{ndim}I", raw[4:header_len])
    dtype = _IDX_DTYPES[dtype_code]
    expected = int(np.prod(dims)) * dtype.itemsize
    if len(raw) - header_len != expected:
        raise IdxFormatError(
            f"{path}: payload is {len(raw) - header_len} bytes, dims {dims} require {expected}"
        )
    data = np.frombuffer(raw, dtype=dtype, offset=header_len).reshape(dims)
    return data.astype(dtype.newbyteorder("="))


def load_idx(images_path, labels_path) -> Dataset:
    """Dataset from an IDX image file plus its IDX label file.

    Images flatten to one row per item; ubyte pixels scale to [0, 1]
    (255 -> 1.0), other dtypes pass through as float64.
    """
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.ndim < 2:
        raise IdxFormatError(f"{images_path}: image file must have >= 2 dimensions")
    if labels.ndim != 1:
        raise IdxFormatError(f"{labels_path}: label file must be 1-dimensional")
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"item counts disagree: {images.shape[0]} images vs {labels.shape[0]} labels"
        )
    flat = images.reshape(images.shape[0], -1).astype(np.float64)
    if images.dtype == np.uint8:
        flat /= 255.0
    labels = labels.astype(np.int64)
    if labels.size and labels.min() < 0:
        raise IdxFormatError(f"{labels_path}: labels must be nonnegative")
    return Dataset(flat, labels, class_count=int(labels.max()) + 1 if labels.size else 0)


@dataclass
class CsvSchema:
    label_column: str


def load_csv(path, schema: CsvSchema) -> Dataset:
    """Dataset from a headered CSV; all non-label columns become features."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        if schema.label_column not in header:
            raise CsvFormatError(f"{path}: no column named {schema.label_column!r} in header")
        label_idx = header.index(schema.label_column)
        feats, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                labels.append(int(row[label_idx]))
                feats.append([float(v) for j, v in enumerate(row) if j != label_idx])
            except ValueError as exc:
                raise CsvFormatError(f"{path}:{lineno}: {exc}") from None
    if not feats:
        raise CsvFormatError(f"{path}: no data rows")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0:
        raise CsvFormatError(f"{path}: labels must be nonnegative")
    return Dataset(np.asarray(feats, dtype=np.float64), labels, class_count=int(labels.max()) + 1)


def train_test_split(ds: Dataset, n_train: int, rng) -> tuple[Dataset, Dataset]:
    """Seeded shuffle into disjoint, exhaustive train/test parts."""
    n = len(ds)
    if n_train < 0 or n_train > n:
        raise ValueError(f"n_train={n_train} out of range for dataset of {n}")
    perm = rng.permutation(n)
    tr, te = perm[:n_train], perm[n_train:]
    return (
        Dataset(ds.inputs[tr], ds.labels[tr], ds.class_count),
        Dataset(ds.inputs[te], ds.labels[te], ds.class_count),
    )
