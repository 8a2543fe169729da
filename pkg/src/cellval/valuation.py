"""Out-of-bag valuation of points and cells.

A cell ``(i, j)`` is scored by averaging ``T(y_i, f_b(x_i))`` over the
learners ``b`` for which row ``i`` is out of bag and column ``j`` is in the
learner's feature subset.  Cells that no learner covers are NaN, with a pair
count of zero.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .ensemble import EnsembleRecord
from .errors import ComputeError

MISSING = np.nan


class ScoreFunction(str, enum.Enum):
    ACCURACY = "accuracy"
    NEG_SQUARED_ERROR = "neg_squared_error"
    DIST_REG_ACCURACY = "dist_reg_accuracy"

    @classmethod
    def parse(cls, value) -> "ScoreFunction":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower().replace("-", "_"))


@dataclass(frozen=True, eq=False)
class CellValuation:
    scores: np.ndarray
    pair_counts: np.ndarray

    @property
    def missing(self) -> np.ndarray:
        return self.pair_counts == 0


@dataclass(frozen=True, eq=False)
class PointValuation:
    """Per-point scores.

    ``counts`` is the number of contributing learners for Data-OOB, or the
    number of non-missing cells for a marginalized cell valuation.
    ``partial`` flags rows averaged over fewer than all cells.
    """

    scores: np.ndarray
    counts: np.ndarray
    partial: np.ndarray | None = None

    @property
    def missing(self) -> np.ndarray:
        return self.counts == 0


def _dist_term(rec: EnsembleRecord, b: int, X, y, oob: np.ndarray) -> np.ndarray:
    """Distance of each OOB point to its class centroid in learner ``b``'s
    bootstrap sample, negated and scaled into [-1, 0]."""
    S = rec.subsets[b]
    w = rec.counts[b].astype(np.float64)
    Xs = X[:, S]
    dist = np.zeros(len(oob))
    ys = y[oob]
    for c in np.unique(ys):
        wc = w * (y == c)
        tot = wc.sum()
        sel = ys == c
        if tot == 0:
            # class absent from the bootstrap: no centroid, no penalty
            continue
        mu = (wc @ Xs) / tot
        dist[sel] = np.sqrt(((Xs[oob[sel]] - mu) ** 2).sum(axis=1))
    top = dist.max(initial=0.0)
    if top <= 0:
        return np.zeros(len(oob))
    return -dist / top


def learner_scores(rec: EnsembleRecord, ds: Dataset, T: ScoreFunction, b: int):
    """OOB rows of learner ``b`` and the score ``T`` earns on each of them."""
    oob = np.flatnonzero(rec.counts[b] == 0)
    X, y = ds.features, ds.labels
    if len(oob) == 0:
        return oob, np.zeros(0)
    pred = rec.predict_learner(b, X[oob])
    yt = y[oob]
    if T is ScoreFunction.ACCURACY:
        t = (pred == yt).astype(np.float64)
    elif T is ScoreFunction.NEG_SQUARED_ERROR:
        t = -((yt - pred).astype(np.float64) ** 2)
    else:
        t = (pred == yt).astype(np.float64) + _dist_term(rec, b, X, y, oob)
    return oob, t


def all_learner_scores(rec: EnsembleRecord, ds: Dataset, T, threads: int = 1) -> list:
    rec.check_dataset(ds)
    T = ScoreFunction.parse(T)

    def work(b):
        return learner_scores(rec, ds, T, b)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(work, range(rec.n_learners)))
    return [work(b) for b in range(rec.n_learners)]


def compute_2d_oob(rec: EnsembleRecord, ds: Dataset, T=ScoreFunction.ACCURACY,
                   threads: int = 1, scores=None) -> CellValuation:
    """Cell valuation of every ``(row, column)`` pair.

    Learner predictions may be computed in parallel; contributions are then
    summed into the numerator in learner order, so the result is identical
    for any thread count.
    """
    if scores is None:
        scores = all_learner_scores(rec, ds, T, threads)
    num = np.zeros((ds.n, ds.d))
    den = np.zeros((ds.n, ds.d), dtype=np.int64)
    for b, (oob, t) in enumerate(scores):
        if len(oob) == 0:
            continue
        cells = np.ix_(oob, rec.subsets[b])
        num[cells] += t[:, None]
        den[cells] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, num / np.maximum(den, 1), MISSING)
    return CellValuation(out, den)


def compute_data_oob(rec: EnsembleRecord, ds: Dataset, T=ScoreFunction.ACCURACY,
                     threads: int = 1, scores=None) -> PointValuation:
    """Point valuation: mean OOB score of each row over all learners."""
    if scores is None:
        scores = all_learner_scores(rec, ds, T, threads)
    num = np.zeros(ds.n)
    den = np.zeros(ds.n, dtype=np.int64)
    for oob, t in scores:
        num[oob] += t
        den[oob] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, num / np.maximum(den, 1), MISSING)
    return PointValuation(out, den)


def marginalize(cv: CellValuation) -> PointValuation:
    """Row means of a cell valuation.

    Rows with some missing cells average the cells that are present and are
    flagged ``partial``; rows with no present cell stay missing.
    """
    present = ~np.isnan(cv.scores)
    k = present.sum(axis=1)
    total = np.where(present, cv.scores, 0.0).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(k > 0, total / np.maximum(k, 1), MISSING)
    partial = (k > 0) & (k < cv.scores.shape[1])
    return PointValuation(out, k, partial)


# --- reference formulations ---------------------------------------------
#
# The functions below recompute cell and point values by grouping learners on
# identical feature subsets and averaging per-subset Data-OOB values.  They
# are slow and exist to cross-check the kernels above.

def _subset_groups(rec: EnsembleRecord) -> dict:
    groups: dict = {}
    for b in range(rec.n_learners):
        groups.setdefault(tuple(int(j) for j in rec.subsets[b]), []).append(b)
    return groups


def _subset_oob_values(rec, ds, T, i, scores=None):
    """Per-subset Data-OOB of row ``i``: ``{subset: (value, n_oob)}``."""
    if scores is None:
        scores = all_learner_scores(rec, ds, T)
    out = {}
    for subset, members in _subset_groups(rec).items():
        vals = []
        for b in members:
            oob, t = scores[b]
            pos = np.searchsorted(oob, i)
            if pos < len(oob) and oob[pos] == i:
                vals.append(t[pos])
        if vals:
            out[subset] = (sum(vals) / len(vals), len(vals))
    return out


def conditional_oob_expectation(rec: EnsembleRecord, ds: Dataset, T, i: int, j: int,
                                scores=None) -> float:
    """Expected per-subset Data-OOB of row ``i`` over the empirical subset
    distribution, conditioned on the subset containing column ``j``."""
    rec.check_dataset(ds)
    T = ScoreFunction.parse(T)
    per_subset = _subset_oob_values(rec, ds, T, i, scores)
    weights, values = [], []
    for subset, (phi, n_oob) in per_subset.items():
        if j in subset:
            weights.append(n_oob)
            values.append(phi)
    if not weights:
        raise ComputeError(f"no learner has row {i} out of bag with column {j} in its subset")
    alpha = np.asarray(weights, dtype=np.float64)
    alpha /= alpha.sum()
    return float(alpha @ np.asarray(values))


def marginal_oob_expectation(rec: EnsembleRecord, ds: Dataset, T, i: int, scores=None) -> float:
    """Row ``i``'s per-subset Data-OOB averaged with weights
    ``(1/d) * sum_j alpha[i, j, subset]``."""
    rec.check_dataset(ds)
    T = ScoreFunction.parse(T)
    per_subset = _subset_oob_values(rec, ds, T, i, scores)
    d = ds.d
    # normalizer of alpha[i, j, .] for each column j
    col_total = np.zeros(d)
    for subset, (_, n_oob) in per_subset.items():
        col_total[list(subset)] += n_oob
    if np.any(col_total == 0):
        raise ComputeError(f"row {i} has a column never covered out of bag")
    acc = 0.0
    for subset, (phi, n_oob) in per_subset.items():
        weight = sum(n_oob / col_total[j] for j in subset) / d
        acc += weight * phi
    return float(acc)
