"""Regression dataset container and its CSV form.

CSV layout: header ``x1,...,xM,y_raw,y_scaled,split`` with ``split`` one of
``train``/``test``. Floats are written with ``repr`` so a write/read cycle
reproduces every value bit for bit.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError


@dataclass(eq=False)
class Dataset:
    features: np.ndarray
    targets_raw: np.ndarray
    targets_scaled: np.ndarray
    train_indices: np.ndarray
    test_indices: np.ndarray
    scaler: object = None

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.targets_raw = np.asarray(self.targets_raw, dtype=float).ravel()
        self.targets_scaled = np.asarray(self.targets_scaled, dtype=float).ravel()
        self.train_indices = np.asarray(self.train_indices, dtype=np.int64).ravel()
        self.test_indices = np.asarray(self.test_indices, dtype=np.int64).ravel()
        n = self.features.shape[0]
        if self.targets_raw.size != n or self.targets_scaled.size != n:
            raise ParameterError("features and targets must have the same number of rows")
        both = np.concatenate([self.train_indices, self.test_indices])
        if both.size != n or not np.array_equal(np.sort(both), np.arange(n)):
            raise ParameterError("train and test indices must partition 0..N-1")
        if (np.abs(self.targets_scaled) > 3.0).any():
            raise ParameterError("scaled targets must lie in [-3, 3]")

    @property
    def num_observations(self):
        return self.features.shape[0]

    @property
    def num_features(self):
        return self.features.shape[1]

    def split(self, part):
        idx = {"train": self.train_indices, "test": self.test_indices}[part]
        return self.features[idx], self.targets_scaled[idx], self.targets_raw[idx]

    def same_as(self, other):
        return all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("features", "targets_raw", "targets_scaled", "train_indices", "test_indices")
        )


def dataset_to_csv(dataset):
    n, m = dataset.features.shape
    split = np.empty(n, dtype=object)
    split[dataset.train_indices] = "train"
    split[dataset.test_indices] = "test"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{j + 1}" for j in range(m)] + ["y_raw", "y_scaled", "split"])
    for i in range(n):
        row = [repr(float(v)) for v in dataset.features[i]]
        row += [repr(float(dataset.targets_raw[i])), repr(float(dataset.targets_scaled[i])), split[i]]
        writer.writerow(row)
    return buf.getvalue()


def write_dataset(dataset, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dataset_to_csv(dataset))


def parse_dataset(text):
    """Parse the CSV form; the outcome scaler is recovered from ``y_raw``/``y_scaled``."""
    from .preprocess import OutcomeScaler

    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DataError("empty dataset file")
    header = rows[0]
    m = len(header) - 3
    expected = [f"x{j + 1}" for j in range(m)] + ["y_raw", "y_scaled", "split"]
    if m < 1 or header != expected:
        raise DataError(f"dataset header must be x1..xM,y_raw,y_scaled,split; got {header}")
    body = [r for r in rows[1:] if r]
    if not body:
        raise DataError("dataset file has no data rows")
    values = np.empty((len(body), m + 2))
    split = []
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"line {i}: expected {len(header)} fields, got {len(row)}")
        try:
            values[i - 2] = [float(v) for v in row[:-1]]
        except ValueError as exc:
            raise DataError(f"line {i}: {exc}") from None
        if row[-1] not in ("train", "test"):
            raise DataError(f"line {i}: split must be 'train' or 'test', got {row[-1]!r}")
        split.append(row[-1])
    split = np.array(split)
    raw, scaled = values[:, m], values[:, m + 1]
    try:
        return Dataset(
            features=values[:, :m],
            targets_raw=raw,
            targets_scaled=scaled,
            train_indices=np.flatnonzero(split == "train"),
            test_indices=np.flatnonzero(split == "test"),
            scaler=OutcomeScaler.recover(raw, scaled),
        )
    except ParameterError as exc:
        raise DataError(str(exc)) from None


def read_dataset(path):
    with open(path, encoding="utf-8") as fh:
        return parse_dataset(fh.read())
