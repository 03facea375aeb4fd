"""Dataset ingestion and synthesis.

CSV format: first column an integer class label, remaining columns finite
decimal features; a header row is optional via flag.  `gen_blobs` builds a
desk-scale Gaussian-cluster stand-in for extracted-feature datasets.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dpscale.optimizer import Dataset


class CsvParseError(ValueError):
    """A cell failed to parse; carries its row and column."""

    def __init__(self, row: int, col: int, message: str):
        super().__init__(f"row {row}, column {col}: {message}")
        self.row = row
        self.col = col


@dataclass(frozen=True)
class BlobSpec:
    """Synthetic Gaussian-cluster classification problem."""

    n_classes: int
    dim: int
    n_samples: int
    separation: float
    noise_scale: float = 1.0
    anisotropy: float = 1.0
    seed: int = 0
    split: float = 0.8

    def __post_init__(self) -> None:
        if self.n_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.n_classes}")
        if self.n_samples < self.n_classes:
            raise ValueError("need at least one sample per class")
        if not (0.0 < self.split < 1.0):
            raise ValueError(f"split fraction must lie in (0, 1), got {self.split}")
        if self.separation <= 0 or self.noise_scale < 0:
            raise ValueError("separation must be positive and noise_scale nonnegative")
        if self.anisotropy < 1.0:
            raise ValueError(f"anisotropy must be at least 1, got {self.anisotropy}")


def gen_blobs(spec: BlobSpec) -> tuple[Dataset, Dataset]:
    """K Gaussian clusters with centers at mutual distance >= separation.

    Deterministic per seed; returns a disjoint (train, test) split.
    """
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed & 0xFFFFFFFFFFFFFFFF, 7]))
    K, d = spec.n_classes, spec.dim
    if K <= d:
        # Scaled standard basis: pairwise distance is exactly
        # separation regardless of K.
        centers = np.zeros((K, d))
        centers[np.arange(K), np.arange(K)] = spec.separation / math.sqrt(2.0)
    else:
        centers = rng.normal(size=(K, d))
        for _ in range(1000):
            diff = centers[:, None, :] - centers[None, :, :]
            dist = np.linalg.norm(diff, axis=2)
            np.fill_diagonal(dist, np.inf)
            if dist.min() >= spec.separation:
                break
            centers *= 1.5
    labels = rng.integers(0, K, size=spec.n_samples)
    noise = rng.normal(size=(spec.n_samples, d))
    if spec.anisotropy > 1.0:
        # Shared anisotropic within-class covariance: the class-mean
        # direction is then suboptimal and accuracy depends on how far
        # training actually progresses, not just on the first step.
        scales = np.geomspace(1.0, spec.anisotropy, d)
        basis = np.linalg.qr(rng.normal(size=(d, d)))[0]
        noise = (noise * scales) @ basis.T
    features = centers[labels] + spec.noise_scale * noise
    order = rng.permutation(spec.n_samples)
    features, labels = features[order], labels[order]
    n_train = int(round(spec.split * spec.n_samples))
    train = Dataset(features[:n_train], labels[:n_train], K)
    test = Dataset(features[n_train:], labels[n_train:], K)
    return train, test


def load_csv(path: str | Path, header: bool = False) -> Dataset:
    """Load a labeled dataset: integer label column, then float features."""
    rows: list[list[str]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if row:
                rows.append(row)
    if header and rows:
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: empty dataset file")

    n_cols = len(rows[0])
    labels = np.empty(len(rows), dtype=np.int64)
    features = np.empty((len(rows), n_cols - 1), dtype=np.float64)
    for i, row in enumerate(rows):
        line = i + (2 if header else 1)
        if len(row) != n_cols:
            raise CsvParseError(line, len(row), f"expected {n_cols} columns, got {len(row)}")
        try:
            labels[i] = int(row[0])
        except ValueError:
            raise CsvParseError(line, 1, f"label {row[0]!r} is not an integer") from None
        if labels[i] < 0:
            raise CsvParseError(line, 1, f"label {labels[i]} is negative")
        for j, cell in enumerate(row[1:], start=2):
            try:
                value = float(cell)
            except ValueError:
                raise CsvParseError(line, j, f"cell {cell!r} is not numeric") from None
            if not math.isfinite(value):
                raise CsvParseError(line, j, f"cell {cell!r} is not finite")
            features[i, j - 2] = value
    return Dataset(features, labels, int(labels.max()) + 1)


def write_csv(path: str | Path, data: Dataset) -> None:
    """Write a dataset in the load_csv format with exact float round-trip."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for label, row in zip(data.labels, data.features):
            writer.writerow([int(label)] + [f"{v:.17g}" for v in row])
