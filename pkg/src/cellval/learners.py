"""Weak learners: weighted CART classification trees and binary logistic
regression fitted by full-batch gradient descent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _cart
from .errors import DataError


@dataclass(frozen=True)
class TreeParams:
    """``max_depth=None`` grows until leaves are pure.

    ``min_samples_split`` and ``min_weight_leaf`` count bootstrap weight, so
    a row drawn twice counts twice.
    """

    max_depth: int | None = None
    min_samples_split: int = 2
    min_weight_leaf: float = 1.0

    def __post_init__(self):
        if self.min_samples_split < 2:
            raise DataError("min_samples_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 0:
            raise DataError("max_depth must be >= 0 or None")


@dataclass(frozen=True, eq=False)
class Tree:
    """A fitted tree stored as flat node arrays.

    Node 0 is the root.  Internal nodes route ``x[feature] <= threshold`` to
    ``left``; leaves have ``feature == -1`` and carry weighted class counts
    in ``value``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_features(self) -> int:
        return int(self.feature.max(initial=-1)) + 1

    @property
    def leaf_class(self) -> np.ndarray:
        # argmax returns the first maximum: lowest class index wins ties
        return np.argmax(self.value, axis=1)

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        return _cart.predict_tree(self.feature, self.threshold, self.left, self.right,
                                  self.leaf_class, X)

    def same_as(self, other: "Tree") -> bool:
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("feature", "threshold", "left", "right", "value"))


def fit_tree(X, y, weights=None, params: TreeParams = TreeParams(),
             n_classes: int | None = None) -> Tree:
    """Greedy weighted-Gini CART.

    Thresholds are midpoints between consecutive distinct values; among
    equally good splits the lowest feature index and then the lowest
    threshold wins.  Rows with zero weight are dropped before fitting.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] < 1:
        raise DataError("X must be a 2-D matrix with at least one column")
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != y.shape or X.shape[0] != len(y):
        raise DataError("X, y and weights disagree on the number of rows")
    if np.any(w < 0):
        raise DataError("weights must be nonnegative")
    keep = w > 0
    if not keep.any():
        raise DataError("all weights are zero")
    if n_classes is None:
        n_classes = max(2, int(y.max()) + 1)
    Xk = np.ascontiguousarray(X[keep])
    max_depth = -1 if params.max_depth is None else params.max_depth
    return Tree(*_cart.build_tree(Xk, y[keep], w[keep], n_classes, max_depth,
                                  float(params.min_samples_split), float(params.min_weight_leaf)))


def predict_tree(tree: Tree, x_sub) -> int:
    return int(tree.predict(np.asarray(x_sub, dtype=np.float64))[0])


@dataclass(frozen=True, eq=False)
class LogisticModel:
    weights: np.ndarray
    bias: float

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return X @ self.weights + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        # probability exactly 0.5 goes to class 1
        return (self.predict_proba(X) >= 0.5).astype(np.int64)


@dataclass(frozen=True)
class ConstantModel:
    """Predicts one class everywhere; stands in for a learner whose
    bootstrap sample held a single class."""

    label: int

    def predict(self, X) -> np.ndarray:
        return np.full(np.atleast_2d(X).shape[0], self.label, dtype=np.int64)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logistic_objective(params, X, y, l2=1e-4, sample_weight=None):
    """Weighted mean negative log-likelihood plus ``l2/2 * |w|^2``.

    ``params`` is ``[weights..., bias]``.  Returns ``(loss, gradient)``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    s = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    s = s / s.sum()
    beta, b = params[:-1], params[-1]
    z = X @ beta + b
    # log(1 + e^z) - y z, computed without overflow
    nll = np.logaddexp(0.0, z) - y * z
    loss = s @ nll + 0.5 * l2 * beta @ beta
    r = (_sigmoid(z) - y) * s
    grad = np.empty_like(params, dtype=np.float64)
    grad[:-1] = X.T @ r + l2 * beta
    grad[-1] = r.sum()
    return loss, grad


def fit_logistic(X, y, learning_rate: float = 0.1, iterations: int = 500, l2: float = 1e-4,
                 sample_weight=None) -> LogisticModel:
    """Binary logistic regression by plain gradient descent from zero."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise DataError("X must be m x p with one label per row")
    if np.any((y != 0) & (y != 1)):
        raise DataError("logistic regression needs labels in {0, 1}")
    s = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    present = np.unique(y[s > 0])
    if len(present) < 2:
        raise DataError("logistic regression needs both classes present")
    s = s / s.sum()
    yf = y.astype(np.float64)
    beta = np.zeros(X.shape[1])
    b = 0.0
    for _ in range(iterations):
        r = (_sigmoid(X @ beta + b) - yf) * s
        beta = beta - learning_rate * (X.T @ r + l2 * beta)
        b = b - learning_rate * r.sum()
    return LogisticModel(beta, float(b))


def accuracy(model, X, y=None, subset=None) -> float:
    """Fraction of rows where ``model`` predicts ``y``.

    ``X`` may be a :class:`~cellval.data.Dataset`, in which case ``y``
    defaults to its labels.  ``subset`` restricts the columns the model sees.
    """
    if hasattr(X, "features"):
        ds = X
        X = ds.features
        y = ds.labels if y is None else y
    X = np.asarray(X, dtype=np.float64)
    if subset is not None:
        X = X[:, np.asarray(subset, dtype=np.int64)]
    y = np.asarray(y)
    if len(y) == 0:
        raise DataError("accuracy of an empty set is undefined")
    return float(np.mean(model.predict(X) == y))
