"""Data-quality interventions guided by valuation scores, judged by the test
accuracy of a logistic model refitted after each step."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset
from ..errors import DataError
from ..learners import accuracy, fit_logistic
from ..seeding import round_half_up
from ..valuation import CellValuation, PointValuation

FIX_MODES = ("ground_truth", "column_mean")
MISSING_POLICIES = ("last", "impute")


def rank_with_missing(scores) -> np.ndarray:
    """Ascending stable ranking with NaN scores placed after all others."""
    s = np.asarray(scores, dtype=np.float64)
    nan = np.isnan(s)
    return np.lexsort((np.where(nan, 0.0, s), nan))


def impute_column_means(scores: np.ndarray) -> np.ndarray:
    """Replace missing cell scores by the mean present score of their column."""
    s = np.array(scores, dtype=np.float64)
    nan = np.isnan(s)
    present = (~nan).sum(axis=0)
    col = np.where(nan, 0.0, s).sum(axis=0) / np.maximum(present, 1)
    return np.where(nan, col[None, :], s)


def _test_accuracy(train: Dataset, test: Dataset, logistic: dict) -> float:
    model = fit_logistic(train.features, train.labels, **logistic)
    return accuracy(model, test)


@dataclass(frozen=True, eq=False)
class FixationCurve:
    budgets: np.ndarray
    accuracies: np.ndarray
    n_fixed: np.ndarray
    n_fixed_true: np.ndarray

    def to_dict(self) -> dict:
        return {"budgets": self.budgets.tolist(), "accuracies": self.accuracies.tolist(),
                "n_fixed": self.n_fixed.tolist(), "n_fixed_true": self.n_fixed_true.tolist()}


def repair_cells(corrupt: Dataset, clean: Dataset | None, cells: np.ndarray,
                 mode: str = "ground_truth") -> Dataset:
    """Repair the flat cell indices ``cells`` of ``corrupt``.

    ``ground_truth`` copies the value from ``clean``; ``column_mean`` uses
    the mean of the other cells of the same column in ``corrupt``.
    """
    X = corrupt.features.copy()
    if len(cells) == 0:
        return corrupt.with_features(X)
    r, c = np.unravel_index(cells, X.shape)
    if mode == "ground_truth":
        if clean is None:
            raise DataError("ground_truth repair needs the clean dataset")
        X[r, c] = clean.features[r, c]
    elif mode == "column_mean":
        if corrupt.n < 2:
            raise DataError("column_mean repair needs at least two rows")
        colsum = corrupt.features.sum(axis=0)
        X[r, c] = (colsum[c] - corrupt.features[r, c]) / (corrupt.n - 1)
    else:
        raise DataError(f"mode must be one of {FIX_MODES}, got {mode!r}")
    return corrupt.with_features(X)


def cell_fixation_run(corrupt: Dataset, mask: np.ndarray, clean: Dataset | None,
                      cv: CellValuation, test: Dataset, budget_steps=(0.0, 0.04, 0.1, 1.0),
                      mode: str = "ground_truth", missing: str = "last",
                      logistic: dict | None = None) -> FixationCurve:
    """Repair the lowest-valued cells at each budget and record test accuracy.

    A budget is a fraction of all ``n * d`` cells.  Missing cell scores rank
    after every present score unless ``missing="impute"``.
    """
    logistic = logistic or {}
    n, d = corrupt.n, corrupt.d
    mask = np.asarray(mask, dtype=bool)
    if missing not in MISSING_POLICIES:
        raise DataError(f"missing policy must be one of {MISSING_POLICIES}")
    if mask.shape != (n, d) or cv.scores.shape != (n, d):
        raise DataError(f"mask and cell scores must have shape {(n, d)}")
    if clean is not None and (clean.n, clean.d) != (n, d):
        raise DataError("clean and corrupt datasets differ in shape")
    if test.d != d:
        raise DataError("test set has a different number of columns")
    budgets = np.asarray(budget_steps, dtype=np.float64)
    if np.any(np.diff(budgets) < 0) or budgets.min(initial=0) < 0 or budgets.max(initial=0) > 1:
        raise DataError("budgets must be ascending fractions in [0, 1]")
    scores = impute_column_means(cv.scores) if missing == "impute" else cv.scores
    order = rank_with_missing(scores.ravel())
    flat_mask = mask.ravel()
    accs, fixed, fixed_true = [], [], []
    for bud in budgets:
        k = round_half_up(bud * n * d)
        repaired = repair_cells(corrupt, clean, order[:k], mode)
        accs.append(_test_accuracy(repaired, test, logistic))
        fixed.append(k)
        fixed_true.append(int(flat_mask[order[:k]].sum()))
    return FixationCurve(budgets, np.asarray(accs), np.asarray(fixed), np.asarray(fixed_true))


@dataclass(frozen=True, eq=False)
class RemovalCurve:
    fractions: np.ndarray
    accuracies: np.ndarray
    truncated: bool = False
    removed_order: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"fractions": self.fractions.tolist(), "accuracies": self.accuracies.tolist(),
                "truncated": self.truncated}


def point_removal_run(ds: Dataset, pv: PointValuation, test: Dataset,
                      max_remove_fraction: float = 0.2, step: float = 0.01,
                      logistic: dict | None = None) -> RemovalCurve:
    """Drop the lowest-valued points in increments of ``step`` and refit.

    Ties are removed in index order.  Missing scores are removed last.  If a
    step would leave a single class the curve stops and ``truncated`` is set.
    """
    logistic = logistic or {}
    if not 0 <= max_remove_fraction < 1:
        raise DataError("max_remove_fraction must lie in [0, 1)")
    if step <= 0:
        raise DataError("step must be positive")
    if len(pv.scores) != ds.n:
        raise DataError("point scores and dataset differ in length")
    order = rank_with_missing(pv.scores)
    n_steps = int(np.floor(max_remove_fraction / step + 1e-9))
    fractions, accs = [], []
    truncated = False
    for s in range(n_steps + 1):
        frac = s * step
        k = round_half_up(frac * ds.n)
        keep = np.sort(order[k:])
        if len(np.unique(ds.labels[keep])) < 2:
            truncated = True
            break
        fractions.append(frac)
        accs.append(_test_accuracy(ds.take(keep), test, logistic))
    return RemovalCurve(np.asarray(fractions), np.asarray(accs), truncated, order)
