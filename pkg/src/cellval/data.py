"""Tabular datasets: CSV ingestion, normalization, splitting, label noise and
synthetic Gaussian data."""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .seeding import rng, round_half_up

STD_FLOOR = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable ``n x d`` feature matrix with integer class labels.

    ``labels`` hold codes in ``[0, n_classes)``; ``class_names`` maps codes
    back to the original label strings.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    n_classes: int
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if n < 1 or d < 1:
            raise DataError(f"dataset must have n >= 1 and d >= 1, got {X.shape}")
        if y.shape != (n,):
            raise DataError(f"labels must have shape ({n},), got {y.shape}")
        if not np.all(np.isfinite(X)):
            bad = np.argwhere(~np.isfinite(X))[0]
            raise DataError(f"non-finite feature value at row {bad[0]}, column {bad[1]}")
        if self.n_classes < 2:
            raise DataError(f"need at least 2 classes, got {self.n_classes}")
        if y.size and (y.min() < 0 or y.max() >= self.n_classes):
            raise DataError(f"labels must lie in [0, {self.n_classes})")
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != d or len(set(names)) != d:
            raise DataError("feature_names must hold exactly d unique entries")
        cnames = tuple(str(s) for s in self.class_names) or tuple(
            str(c) for c in range(self.n_classes))
        if len(cnames) != self.n_classes:
            raise DataError("class_names must have n_classes entries")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y.astype(np.int64)))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "class_names", cnames)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.features.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.features).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        return h.hexdigest()

    def with_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(features, self.labels, self.feature_names, self.n_classes, self.class_names)

    def with_labels(self, labels: np.ndarray) -> "Dataset":
        return Dataset(self.features, labels, self.feature_names, self.n_classes, self.class_names)

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.features[rows], self.labels[rows], self.feature_names,
                       self.n_classes, self.class_names)

    def equals(self, other: "Dataset") -> bool:
        return (self.feature_names == other.feature_names
                and self.n_classes == other.n_classes
                and self.class_names == other.class_names
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels))


@dataclass(frozen=True)
class NormalizationParams:
    means: np.ndarray
    stds: np.ndarray
    constant: np.ndarray | None = None

    def apply(self, ds: Dataset) -> Dataset:
        Z = (ds.features - self.means) / self.stds
        if self.constant is not None:
            Z[:, self.constant] = 0.0
        return ds.with_features(Z)

    def invert(self, ds: Dataset) -> Dataset:
        return ds.with_features(ds.features * self.stds + self.means)


def _parse_label_column(label_column, header: list[str] | None, width: int) -> int:
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if header is None:
            raise DataError("label column given by name but the file has no header")
        if label_column not in header:
            raise DataError(f"label column {label_column!r} not in header")
        return header.index(label_column)
    idx = int(label_column)
    if idx < 0:
        idx += width
    if not 0 <= idx < width:
        raise DataError(f"label column index {label_column} out of range for {width} columns")
    return idx


def load_csv(path, label_column=-1, has_header: bool = True,
             class_order: Sequence[str] | None = None) -> Dataset:
    """Read a comma-separated file into a :class:`Dataset`.

    Labels are re-encoded to ``0..C-1`` by order of first appearance unless
    ``class_order`` fixes the encoding.  Positions in error messages are
    1-based file line and column numbers.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [(lineno, r) for lineno, r in enumerate(rows, start=1) if r]
    header = None
    if has_header:
        if not rows:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in rows[0][1]]
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(header) if header is not None else len(rows[0][1])
    if width < 2:
        raise DataError(f"{path}: need at least one feature column and a label column")
    lab = _parse_label_column(label_column, header, width)

    feats = np.empty((len(rows), width - 1), dtype=np.float64)
    raw_labels = []
    for r, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: line {lineno} has {len(row)} fields, expected {width}")
        c_out = 0
        for c, cell in enumerate(row):
            if c == lab:
                raw_labels.append(cell.strip())
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: cannot parse {cell!r} at line {lineno}, column {c + 1}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: non-finite value {cell!r} at line {lineno}, column {c + 1}")
            feats[r, c_out] = v
            c_out += 1

    if class_order is not None:
        classes = [str(c) for c in class_order]
        unknown = set(raw_labels) - set(classes)
        if unknown:
            raise DataError(f"{path}: labels {sorted(unknown)} not in class_order")
    else:
        classes = list(dict.fromkeys(raw_labels))
        if len(classes) < 2:
            raise DataError(f"{path}: only one class present ({classes[0]!r})")
    code = {c: i for i, c in enumerate(classes)}
    labels = np.array([code[s] for s in raw_labels], dtype=np.int64)

    if header is not None:
        names = [h for c, h in enumerate(header) if c != lab]
    else:
        names = [f"x{c}" for c in range(width - 1)]
    return Dataset(feats, labels, tuple(names), len(classes), tuple(classes))


def dumps_csv(ds: Dataset, label_name: str = "label") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*ds.feature_names, label_name])
    for x, y in zip(ds.features, ds.labels):
        w.writerow([*(repr(float(v)) for v in x), ds.class_names[y]])
    return buf.getvalue()


def normalize(ds: Dataset) -> tuple[Dataset, NormalizationParams]:
    """Standardize every column to zero mean and unit (population) std.

    Constant columns are zeroed and their std is recorded as ``STD_FLOOR``;
    any other std is clamped at the floor so near-constant columns cannot
    overflow.
    """
    if ds.n < 2:
        raise DataError("normalize needs at least 2 rows")
    means = ds.features.mean(axis=0)
    stds = np.maximum(ds.features.std(axis=0), STD_FLOOR)
    constant = np.flatnonzero(np.all(ds.features == ds.features[0], axis=0))
    stds[constant] = STD_FLOOR
    params = NormalizationParams(_frozen(means), _frozen(stds), _frozen(constant))
    return params.apply(ds), params


def split(ds: Dataset, n_train: int, n_test: int, seed: int) -> tuple[Dataset, Dataset]:
    train_idx, test_idx = split_indices(ds.n, n_train, n_test, seed)
    return ds.take(train_idx), ds.take(test_idx)


def split_indices(n: int, n_train: int, n_test: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if n_train < 1 or n_test < 0:
        raise DataError("n_train must be >= 1 and n_test >= 0")
    if n_train + n_test > n:
        raise DataError(f"n_train + n_test = {n_train + n_test} exceeds n = {n}")
    perm = rng(seed).permutation(n)
    return perm[:n_train], perm[n_train:n_train + n_test]


def prepare(ds: Dataset, n_train: int, n_test: int, seed: int,
            pooled: bool = False) -> tuple[Dataset, Dataset, NormalizationParams]:
    """Split then normalize.

    Statistics come from the training split and are reused for the test
    split; ``pooled=True`` computes them on the full pool before splitting.
    """
    if pooled:
        ds, params = normalize(ds)
        train, test = split(ds, n_train, n_test, seed)
        return train, test, params
    train, test = split(ds, n_train, n_test, seed)
    train, params = normalize(train)
    return train, params.apply(test), params


def flip_labels(ds: Dataset, ratio: float, seed: int) -> tuple[Dataset, np.ndarray]:
    """Flip ``round(ratio * n)`` uniformly chosen binary labels.

    Returns the noisy dataset and a length-n boolean mask of flipped rows.
    """
    if ds.n_classes != 2:
        raise DataError("label flipping is only defined for binary classification")
    if not 0 < ratio < 1:
        raise DataError(f"ratio must lie in (0, 1), got {ratio}")
    k = round_half_up(ratio * ds.n)
    mask = np.zeros(ds.n, dtype=bool)
    if k:
        mask[rng(seed).choice(ds.n, size=k, replace=False)] = True
    return apply_flips(ds, mask), mask


def apply_flips(ds: Dataset, mask: np.ndarray) -> Dataset:
    y = ds.labels.copy()
    y[mask] = 1 - y[mask]
    return ds.with_labels(y)


def synth_gaussian(n: int, d: int, class_sep: float, seed: int) -> Dataset:
    """Two balanced isotropic Gaussian classes with means
    ``+-(class_sep / 2) * (1, ..., 1) / sqrt(d)``."""
    if n < 2 or d < 1 or class_sep < 0:
        raise DataError("synth_gaussian needs n >= 2, d >= 1, class_sep >= 0")
    g = rng(seed)
    y = g.permutation(np.repeat([0, 1], [n // 2, n - n // 2]))
    shift = (class_sep / 2.0) / math.sqrt(d)
    X = g.standard_normal((n, d)) + np.where(y == 1, shift, -shift)[:, None]
    return Dataset(X, y, tuple(f"x{j}" for j in range(d)), 2)
