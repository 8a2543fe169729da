from __future__ import annotations

import warnings
from statistics import NormalDist

import numpy as np

from ..data import STD_FLOOR, Dataset
from ..errors import DataError
from ..seeding import rng, round_half_up

_STD_NORMAL = NormalDist()


class ConstantColumnWarning(UserWarning):
    pass


def tail_threshold(tail_prob: float) -> float:
    """``|z|`` above which a standard normal has two-sided mass ``tail_prob``."""
    return _STD_NORMAL.inv_cdf(1.0 - tail_prob / 2.0)


def sample_tail_z(g: np.random.Generator, tail_prob: float, size: int) -> np.ndarray:
    """Standard-normal draws conditioned on ``|z| >= tail_threshold``.

    The side is a fair coin; the magnitude inverts the CDF of the one-sided
    tail of mass ``tail_prob / 2``.
    """
    half = tail_prob / 2.0
    sign = np.where(g.random(size) < 0.5, -1.0, 1.0)
    u = 1.0 - g.random(size)  # (0, 1]
    mag = np.array([_STD_NORMAL.inv_cdf(1.0 - half * v) for v in u])
    return sign * mag


def inject_cell_outliers(ds: Dataset, row_ratio: float = 0.2, col_ratio: float = 0.2,
                         tail_prob: float = 0.01, seed: int = 0) -> tuple[Dataset, np.ndarray]:
    """Replace a random block of cells with Gaussian-tail values.

    ``round(row_ratio * n)`` rows are chosen, then ``round(col_ratio * d)``
    columns independently for each chosen row.  Each chosen cell is redrawn
    from the two-sided tail of mass ``tail_prob`` of a normal fitted to its
    column in ``ds`` (mean and population std, before any corruption).
    Returns the corrupted dataset and the n x d mask of replaced cells.
    """
    if not 0 < row_ratio < 1 or not 0 < col_ratio < 1:
        raise DataError("row_ratio and col_ratio must lie in (0, 1)")
    if not 0 < tail_prob < 0.5:
        raise DataError("tail_prob must lie in (0, 0.5)")
    n, d = ds.n, ds.d
    g = rng(seed)
    X = ds.features.copy()
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    n_rows = round_half_up(row_ratio * n)
    n_cols = round_half_up(col_ratio * d)
    mask = np.zeros((n, d), dtype=bool)
    for r in np.sort(g.choice(n, size=n_rows, replace=False)):
        mask[r, g.choice(d, size=n_cols, replace=False)] = True
    rows, cols = np.nonzero(mask)
    z = sample_tail_z(g, tail_prob, len(rows))
    flat = std[cols] <= 0
    if flat.any():
        bad = sorted({int(c) for c in cols[flat]})
        warnings.warn(f"constant columns {bad} received outliers at the std floor",
                      ConstantColumnWarning, stacklevel=2)
    X[rows, cols] = mean[cols] + z * np.where(flat, STD_FLOOR, std[cols])
    return ds.with_features(X), mask
