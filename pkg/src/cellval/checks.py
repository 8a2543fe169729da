"""Self-checks run by ``cellval oracle-check``: the fast kernels against the
slow reference formulations, and the Shapley enumerators against each
other."""

from __future__ import annotations

import numpy as np

from .data import synth_gaussian
from .ensemble import EnsembleConfig, train_ensemble
from .seeding import rng
from .shapley import (Utility1D, exact_2d_shapley, exact_2d_shapley_by_permutations,
                      exact_data_shapley, mc_2d_shapley, random_table_utility)
from .valuation import (ScoreFunction, all_learner_scores, compute_2d_oob, compute_data_oob,
                        conditional_oob_expectation, marginal_oob_expectation, marginalize)


def oob_equivalence(seeds, n: int = 40, d: int = 6, n_learners: int = 50,
                    T=ScoreFunction.ACCURACY, threads: int = 1) -> dict:
    """Largest absolute gaps between the kernels and the subset-grouped
    reference values over random small instances."""
    cell_gap = point_gap = bagging_gap = 0.0
    n_cells = 0
    for s in seeds:
        ds = synth_gaussian(n, d, 1.0, s)
        rec = train_ensemble(ds, EnsembleConfig(n_learners=n_learners, feature_ratio=0.5,
                                                master_seed=s), threads)
        scores = all_learner_scores(rec, ds, T, threads)
        cv = compute_2d_oob(rec, ds, T, scores=scores)
        pv = marginalize(cv)
        for i, j in zip(*np.nonzero(~cv.missing)):
            ref = conditional_oob_expectation(rec, ds, T, int(i), int(j), scores)
            cell_gap = max(cell_gap, abs(ref - cv.scores[i, j]))
            n_cells += 1
        for i in np.flatnonzero(cv.pair_counts.min(axis=1) > 0):
            ref = marginal_oob_expectation(rec, ds, T, int(i), scores)
            point_gap = max(point_gap, abs(ref - pv.scores[i]))
        full = train_ensemble(ds, EnsembleConfig(n_learners=n_learners, feature_ratio=1.0,
                                                 master_seed=s), threads)
        a = marginalize(compute_2d_oob(full, ds, T)).scores
        b = compute_data_oob(full, ds, T).scores
        both = ~np.isnan(a) & ~np.isnan(b)
        if not np.array_equal(np.isnan(a), np.isnan(b)):
            bagging_gap = np.inf
        elif both.any():
            bagging_gap = max(bagging_gap, float(np.abs(a[both] - b[both]).max()))
    return {"cell_gap": float(cell_gap), "point_gap": float(point_gap),
            "bagging_gap": float(bagging_gap), "cells_checked": n_cells}


def shapley_agreement(seed: int = 0, n: int = 4, d: int = 3, n_utilities: int = 10,
                      mc_samples: int = 20000) -> dict:
    enum_gap = 0.0
    for k in range(n_utilities):
        u = random_table_utility(n, d, seed + k)
        enum_gap = max(enum_gap, float(np.abs(exact_2d_shapley(u, n, d)
                                              - exact_2d_shapley_by_permutations(u, n, d)).max()))
    u = random_table_utility(n, d, seed)
    mc, _ = mc_2d_shapley(u, n, d, mc_samples, seed)
    mc_gap = float(np.abs(mc - exact_2d_shapley(u, n, d)).max())

    table = rng(seed, 1).random(1 << 8)
    u1 = Utility1D(lambda S: table[sum(1 << i for i in S)], empty_value=float(table[0]))
    phi = exact_data_shapley(u1, 8)
    efficiency_gap = abs(float(phi.sum()) - (u1(range(8)) - u1(())))
    return {"enumerator_gap": enum_gap, "mc_gap": mc_gap, "efficiency_gap": efficiency_gap}
