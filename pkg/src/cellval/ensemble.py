"""Subset bagging: each learner sees a bootstrap resample of the rows and a
random subset of the columns.

Learner ``b`` draws its randomness from ``derive_seed(master_seed, b)``, so
the trained ensemble does not depend on how learners are scheduled across
threads.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset
from .errors import ConfigError, DataError
from .learners import ConstantModel, LogisticModel, Tree, TreeParams, fit_logistic, fit_tree
from .seeding import derive_seed, rng, round_half_up

WEAK_LEARNERS = ("tree", "logistic")

# sub-stream tags under a learner's seed
_BOOTSTRAP_STREAM = 0
_SUBSET_STREAM = 1


def bootstrap_counts(n: int, seed: int) -> np.ndarray:
    """Tally ``n`` uniform draws from ``range(n)``."""
    if n < 1:
        raise DataError("bootstrap needs n >= 1")
    draws = rng(seed).integers(0, n, size=n)
    return np.bincount(draws, minlength=n).astype(np.int32)


def sample_subset(d: int, k: int, seed: int) -> np.ndarray:
    """Uniform size-``k`` subset of ``range(d)``, sorted ascending."""
    if not 1 <= k <= d:
        raise DataError(f"subset size must satisfy 1 <= k <= d, got k={k}, d={d}")
    if k == d:
        return np.arange(d, dtype=np.int64)
    return np.sort(rng(seed).choice(d, size=k, replace=False)).astype(np.int64)


@dataclass(frozen=True)
class EnsembleConfig:
    n_learners: int = 1000
    feature_ratio: float = 0.5
    weak_learner: str = "tree"
    tree_params: TreeParams = field(default_factory=TreeParams)
    master_seed: int = 0
    logistic_learning_rate: float = 0.1
    logistic_iterations: int = 500
    logistic_l2: float = 1e-4

    def __post_init__(self):
        if int(self.n_learners) < 1:
            raise ConfigError("n_learners", f"must be >= 1, got {self.n_learners}")
        if not 0 < self.feature_ratio <= 1:
            raise ConfigError("feature_ratio", f"must lie in (0, 1], got {self.feature_ratio}")
        if self.weak_learner not in WEAK_LEARNERS:
            raise ConfigError("weak_learner", f"must be one of {WEAK_LEARNERS}, got {self.weak_learner!r}")

    def subset_size(self, d: int) -> int:
        return max(1, round_half_up(self.feature_ratio * d))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleConfig":
        d = dict(d)
        d["tree_params"] = TreeParams(**d.get("tree_params", {}))
        return cls(**d)


@dataclass(frozen=True, eq=False)
class EnsembleRecord:
    """Everything valuation needs from a trained ensemble.

    ``counts[b, i]`` is how often row ``i`` was drawn for learner ``b``;
    ``subsets[b]`` lists the columns learner ``b`` was trained on.
    """

    counts: np.ndarray
    subsets: np.ndarray
    models: tuple
    config: EnsembleConfig
    fingerprint: str
    n_classes: int
    n_features: int

    @property
    def n_learners(self) -> int:
        return self.counts.shape[0]

    @property
    def n_rows(self) -> int:
        return self.counts.shape[1]

    def oob_mask(self) -> np.ndarray:
        return self.counts == 0

    def predict_learner(self, b: int, X) -> np.ndarray:
        """Predictions of learner ``b`` for full-width rows ``X``."""
        X = np.asarray(X, dtype=np.float64)
        return self.models[b].predict(np.ascontiguousarray(X[:, self.subsets[b]]))

    def check_dataset(self, ds: Dataset) -> None:
        if ds.fingerprint != self.fingerprint:
            raise DataError("ensemble was trained on a different dataset (fingerprint mismatch)")

    def same_as(self, other: "EnsembleRecord") -> bool:
        if not (np.array_equal(self.counts, other.counts)
                and np.array_equal(self.subsets, other.subsets)
                and self.fingerprint == other.fingerprint
                and self.config == other.config
                and len(self.models) == len(other.models)):
            return False
        return all(_same_model(a, b) for a, b in zip(self.models, other.models))


def _same_model(a, b) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, Tree):
        return a.same_as(b)
    if isinstance(a, LogisticModel):
        return np.array_equal(a.weights, b.weights) and a.bias == b.bias
    return a == b


def _fit_one(X, y, n_classes, counts, subset, cfg: EnsembleConfig):
    rows = np.flatnonzero(counts)
    Xs = np.ascontiguousarray(X[np.ix_(rows, subset)])
    ys = y[rows]
    ws = counts[rows].astype(np.float64)
    if cfg.weak_learner == "tree":
        return fit_tree(Xs, ys, ws, cfg.tree_params, n_classes=n_classes)
    present = np.unique(ys)
    if len(present) == 1:
        return ConstantModel(int(present[0]))
    return fit_logistic(Xs, ys, learning_rate=cfg.logistic_learning_rate,
                        iterations=cfg.logistic_iterations, l2=cfg.logistic_l2,
                        sample_weight=ws)


def draw_learner(b: int, n: int, d: int, k: int, master_seed: int):
    """Bootstrap counts and feature subset of learner ``b``."""
    seed = derive_seed(master_seed, b)
    return (bootstrap_counts(n, derive_seed(seed, _BOOTSTRAP_STREAM)),
            sample_subset(d, k, derive_seed(seed, _SUBSET_STREAM)))


def train_ensemble(ds: Dataset, cfg: EnsembleConfig, threads: int = 1) -> EnsembleRecord:
    if cfg.weak_learner == "logistic" and ds.n_classes != 2:
        raise DataError("logistic weak learners need a binary dataset")
    n, d = ds.n, ds.d
    k = cfg.subset_size(d)
    X, y = ds.features, ds.labels

    def work(b):
        counts, subset = draw_learner(b, n, d, k, cfg.master_seed)
        return counts, subset, _fit_one(X, y, ds.n_classes, counts, subset, cfg)

    bs = range(int(cfg.n_learners))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, bs))
    else:
        results = [work(b) for b in bs]

    counts = np.stack([r[0] for r in results])
    subsets = np.stack([r[1] for r in results])
    return EnsembleRecord(counts, subsets, tuple(r[2] for r in results), cfg,
                          ds.fingerprint, ds.n_classes, d)


# --- serialization -------------------------------------------------------
#
# An ensemble is stored as one uncompressed .npz archive:
#   meta         JSON string: format version, config, fingerprint, n_classes, n_features
#   counts       int32  (B, n)
#   subsets      int64  (B, K)
#   kind         int8   (B,)   0 = tree, 1 = logistic, 2 = constant
#   node_offset  int64  (B+1,) slice of the node arrays owned by tree b
#   feature, threshold, left, right, value   concatenated node arrays
#   coef         float64 (B, K), bias float64 (B,)   logistic parameters
#   const_label  int64  (B,)

_FORMAT = 1


def save_ensemble(rec: EnsembleRecord, path) -> None:
    B, K = rec.subsets.shape
    kind = np.zeros(B, np.int8)
    coef = np.zeros((B, K))
    bias = np.zeros(B)
    const = np.full(B, -1, np.int64)
    offsets = [0]
    parts = {f: [] for f in ("feature", "threshold", "left", "right", "value")}
    for b, m in enumerate(rec.models):
        if isinstance(m, Tree):
            for f in parts:
                parts[f].append(getattr(m, f))
            offsets.append(offsets[-1] + m.n_nodes)
            continue
        offsets.append(offsets[-1])
        if isinstance(m, LogisticModel):
            kind[b], coef[b], bias[b] = 1, m.weights, m.bias
        else:
            kind[b], const[b] = 2, m.label
    nodes = {f: (np.concatenate(v) if v else np.zeros((0, rec.n_classes) if f == "value" else 0))
             for f, v in parts.items()}
    meta = json.dumps({"format": _FORMAT, "config": rec.config.to_dict(),
                       "fingerprint": rec.fingerprint, "n_classes": rec.n_classes,
                       "n_features": rec.n_features}, sort_keys=True)
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(meta), counts=rec.counts, subsets=rec.subsets, kind=kind,
                 node_offset=np.asarray(offsets, np.int64), coef=coef, bias=bias,
                 const_label=const, **nodes)


def load_ensemble(path) -> EnsembleRecord:
    with np.load(Path(path), allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("format") != _FORMAT:
            raise DataError(f"unsupported ensemble format {meta.get('format')!r}")
        off = z["node_offset"]
        models = []
        for b, kind in enumerate(z["kind"]):
            if kind == 0:
                sl = slice(off[b], off[b + 1])
                models.append(Tree(*(z[f][sl] for f in ("feature", "threshold", "left",
                                                        "right", "value"))))
            elif kind == 1:
                models.append(LogisticModel(z["coef"][b].copy(), float(z["bias"][b])))
            else:
                models.append(ConstantModel(int(z["const_label"][b])))
        return EnsembleRecord(z["counts"], z["subsets"], tuple(models),
                              EnsembleConfig.from_dict(meta["config"]), meta["fingerprint"],
                              meta["n_classes"], meta["n_features"])
