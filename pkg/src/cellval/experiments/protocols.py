"""End-to-end experiment runs.

Each run is a pure function of its inputs and seed.  Sub-seeds for the
separate random stages are derived from the run seed with fixed stream tags
so that changing one stage never reshuffles another.
"""

from __future__ import annotations

import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field, replace

import numpy as np

from ..data import Dataset, flip_labels, prepare, synth_gaussian
from ..ensemble import EnsembleConfig, EnsembleRecord, train_ensemble
from ..seeding import derive_seed, rng
from ..valuation import (CellValuation, PointValuation, ScoreFunction, compute_2d_oob,
                         marginalize)
from .images import ImageDataset, TriggerSpec, inject_trigger, superpixelize
from .metrics import DetectionCurve, aucpr, detection_curve
from .outliers import inject_cell_outliers
from .repair import FixationCurve, RemovalCurve, cell_fixation_run, point_removal_run

STREAM_DATA = 0
STREAM_SPLIT = 1
STREAM_CORRUPT = 2
STREAM_ENSEMBLE = 3
STREAM_BASELINE = 4


class Stopwatch:
    def __init__(self):
        self.timings: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0


def _seeded(cfg: EnsembleConfig, seed: int) -> EnsembleConfig:
    return replace(cfg, master_seed=derive_seed(seed, STREAM_ENSEMBLE))


def value_cells(ds: Dataset, cfg: EnsembleConfig, T, threads: int = 1,
                watch: Stopwatch | None = None) -> tuple[EnsembleRecord, CellValuation]:
    watch = watch or Stopwatch()
    with watch.stage("train"):
        rec = train_ensemble(ds, cfg, threads=threads)
    with watch.stage("value"):
        cv = compute_2d_oob(rec, ds, T, threads=threads)
    return rec, cv


@dataclass(eq=False)
class OutlierResult:
    clean: Dataset
    corrupt: Dataset
    mask: np.ndarray
    record: EnsembleRecord
    cells: CellValuation
    curve: DetectionCurve
    random_curve: DetectionCurve
    seeds: dict
    timings: dict
    warnings: list = field(default_factory=list)


def outlier_run(clean: Dataset, cfg: EnsembleConfig, T=ScoreFunction.ACCURACY,
                row_ratio: float = 0.2, col_ratio: float = 0.2, tail_prob: float = 0.01,
                seed: int = 0, threads: int = 1) -> OutlierResult:
    """Inject cell outliers, value every cell, rank ascending."""
    watch = Stopwatch()
    seeds = {"run": seed, "corrupt": derive_seed(seed, STREAM_CORRUPT),
             "ensemble": derive_seed(seed, STREAM_ENSEMBLE),
             "baseline": derive_seed(seed, STREAM_BASELINE)}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        with watch.stage("inject"):
            corrupt, mask = inject_cell_outliers(clean, row_ratio, col_ratio, tail_prob,
                                                 seeds["corrupt"])
    rec, cv = value_cells(corrupt, _seeded(cfg, seed), T, threads, watch)
    with watch.stage("metrics"):
        curve = detection_curve(cv.scores, mask, "ascending")
        random_scores = rng(seeds["baseline"]).random(mask.shape)
        random_curve = detection_curve(random_scores, mask, "ascending")
    return OutlierResult(clean, corrupt, mask, rec, cv, curve, random_curve, seeds,
                         watch.timings, [str(w.message) for w in caught])


def fixation_run(res: OutlierResult, test: Dataset, budgets=(0.0, 0.04, 0.1, 1.0),
                 mode: str = "ground_truth", missing: str = "last",
                 logistic: dict | None = None) -> FixationCurve:
    return cell_fixation_run(res.corrupt, res.mask, res.clean, res.cells, test, budgets,
                             mode, missing, logistic)


@dataclass(eq=False)
class MislabelResult:
    noisy: Dataset
    flipped: np.ndarray
    record: EnsembleRecord
    cells: CellValuation
    points: PointValuation
    aucpr: float
    removal: RemovalCurve
    seeds: dict
    timings: dict


def mislabel_run(train: Dataset, test: Dataset, cfg: EnsembleConfig, T=ScoreFunction.ACCURACY,
                 flip_ratio: float = 0.1, max_remove_fraction: float = 0.2,
                 remove_step: float = 0.01, seed: int = 0, threads: int = 1,
                 logistic: dict | None = None) -> MislabelResult:
    """Flip labels, value points by row means of cell values, rank ascending."""
    watch = Stopwatch()
    seeds = {"run": seed, "flip": derive_seed(seed, STREAM_CORRUPT),
             "ensemble": derive_seed(seed, STREAM_ENSEMBLE)}
    noisy, flipped = flip_labels(train, flip_ratio, seeds["flip"])
    rec, cv = value_cells(noisy, _seeded(cfg, seed), T, threads, watch)
    pv = marginalize(cv)
    with watch.stage("metrics"):
        ap = aucpr(pv.scores, flipped, "ascending")
    with watch.stage("removal"):
        removal = point_removal_run(noisy, pv, test, max_remove_fraction, remove_step, logistic)
    return MislabelResult(noisy, flipped, rec, cv, pv, ap, removal, seeds, watch.timings)


@dataclass(eq=False)
class BackdoorResult:
    images: ImageDataset
    features: Dataset
    cell_mask: np.ndarray
    poisoned: np.ndarray
    record: EnsembleRecord
    cells: CellValuation
    curves: list
    mean_auc: float
    seeds: dict
    timings: dict


def backdoor_run(clean_imgs: ImageDataset, spec: TriggerSpec, cfg: EnsembleConfig,
                 seed: int = 0, threads: int = 1, T=ScoreFunction.ACCURACY) -> BackdoorResult:
    """Poison, super-pixelize, value cells, then rank each poisoned image's
    cells in descending order against its trigger cells."""
    watch = Stopwatch()
    seeds = {"run": seed, "poison": derive_seed(seed, STREAM_CORRUPT),
             "ensemble": derive_seed(seed, STREAM_ENSEMBLE)}
    with watch.stage("inject"):
        poisoned_imgs, cell_mask, point_mask = inject_trigger(clean_imgs, spec, seeds["poison"])
        ds = superpixelize(poisoned_imgs)
    rec, cv = value_cells(ds, _seeded(cfg, seed), T, threads, watch)
    rows = np.flatnonzero(point_mask)
    with watch.stage("metrics"):
        if len(rows) == 0:
            # no poisoned image means no positives; let the metric raise
            detection_curve(np.zeros(ds.d), np.zeros(ds.d, dtype=bool))
        curves = [detection_curve(cv.scores[i], cell_mask[i], "descending") for i in rows]
    mean_auc = float(np.mean([c.auc for c in curves]))
    return BackdoorResult(poisoned_imgs, ds, cell_mask, rows, rec, cv, curves, mean_auc,
                          seeds, watch.timings)


def synthetic_tabular(seed: int, n_train: int = 1000, n_test: int = 3000, d: int = 20,
                      class_sep: float = 2.0, pooled: bool = False) -> tuple[Dataset, Dataset]:
    """Draw a Gaussian pool, split it and normalize with training statistics."""
    pool = synth_gaussian(n_train + n_test, d, class_sep, derive_seed(seed, STREAM_DATA))
    train, test, _ = prepare(pool, n_train, n_test, derive_seed(seed, STREAM_SPLIT), pooled)
    return train, test
