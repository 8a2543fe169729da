"""Exact Shapley values by enumeration and a permutation-sampling estimator
for cell-level (row subset x column subset) Shapley values.

Utilities are caller-supplied callables over frozensets of indices.  They are
only practical for tiny games; hard size guards refuse anything larger.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Callable

import numpy as np

from .errors import ComputeError, DataError
from .seeding import rng

MAX_ROWS_1D = 12
MAX_ROWS_2D = 6
MAX_COLS_2D = 6


@dataclass
class Utility1D:
    """Memoized ``u(S)``; ``u(empty)`` is ``empty_value`` unless
    ``call_on_empty`` asks the callable for it."""

    fn: Callable[[frozenset], float]
    empty_value: float = 0.0
    call_on_empty: bool = False
    memoize: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, S) -> float:
        S = frozenset(S)
        if not S and not self.call_on_empty:
            return self.empty_value
        if not self.memoize:
            return float(self.fn(S))
        try:
            return self._cache[S]
        except KeyError:
            v = self._cache[S] = float(self.fn(S))
            return v


@dataclass
class Utility2D:
    """Memoized ``u(S, F)`` over row set ``S`` and column set ``F``.

    When either set is empty the value is ``empty_value`` unless
    ``call_on_empty`` is set.
    """

    fn: Callable[[frozenset, frozenset], float]
    empty_value: float = 0.0
    call_on_empty: bool = False
    memoize: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, S, F) -> float:
        S, F = frozenset(S), frozenset(F)
        if (not S or not F) and not self.call_on_empty:
            return self.empty_value
        if not self.memoize:
            return float(self.fn(S, F))
        key = (S, F)
        try:
            return self._cache[key]
        except KeyError:
            v = self._cache[key] = float(self.fn(S, F))
            return v


def _as_utility(u, cls):
    return u if isinstance(u, cls) else cls(u)


def _subsets(items):
    items = list(items)
    for k in range(len(items) + 1):
        for c in itertools.combinations(items, k):
            yield frozenset(c)


def exact_data_shapley(u, n: int) -> np.ndarray:
    """Shapley value of every player of an ``n``-player game (n <= 12)."""
    if n > MAX_ROWS_1D:
        raise ComputeError(f"exact enumeration refused for n={n} > {MAX_ROWS_1D}")
    if n < 1:
        raise DataError("need at least one player")
    u = _as_utility(u, Utility1D)
    out = np.zeros(n)
    for i in range(n):
        others = [p for p in range(n) if p != i]
        total = 0.0
        for S in _subsets(others):
            total += (u(S | {i}) - u(S)) / comb(n - 1, len(S))
        out[i] = total / n
    return out


def cell_marginal(u, S, F, i: int, j: int) -> float:
    """Second difference of ``u`` when adding row ``i`` and column ``j``."""
    Si, Fj = S | {i}, F | {j}
    return u(Si, Fj) + u(S, F) - u(Si, F) - u(S, Fj)


def _check_2d(n, d):
    if n > MAX_ROWS_2D or d > MAX_COLS_2D:
        raise ComputeError(f"exact enumeration refused for n={n}, d={d} "
                           f"(limits {MAX_ROWS_2D} x {MAX_COLS_2D})")
    if n < 1 or d < 1:
        raise DataError("need at least one row and one column")


def exact_2d_shapley(u, n: int, d: int) -> np.ndarray:
    """Cell Shapley values by enumerating every (row subset, column subset)
    pair with the double binomial weights."""
    _check_2d(n, d)
    u = _as_utility(u, Utility2D)
    out = np.zeros((n, d))
    for i in range(n):
        row_sets = list(_subsets(r for r in range(n) if r != i))
        for j in range(d):
            total = 0.0
            for S in row_sets:
                ws = comb(n - 1, len(S))
                for F in _subsets(c for c in range(d) if c != j):
                    total += cell_marginal(u, S, F, i, j) / (ws * comb(d - 1, len(F)))
            out[i, j] = total / (n * d)
    return out


def exact_2d_shapley_by_permutations(u, n: int, d: int) -> np.ndarray:
    """Same values computed as the average marginal over all row and column
    orderings; an independent route for cross-checking."""
    _check_2d(n, d)
    u = _as_utility(u, Utility2D)
    out = np.zeros((n, d))
    count = 0
    for tau in itertools.permutations(range(d)):
        for sigma in itertools.permutations(range(n)):
            out += _ordered_marginals(u, sigma, tau)
            count += 1
    return out / count


def _ordered_marginals(u, sigma, tau) -> np.ndarray:
    n, d = len(sigma), len(tau)
    grid = np.empty((n + 1, d + 1))
    for a in range(n + 1):
        S = frozenset(sigma[:a])
        for b in range(d + 1):
            grid[a, b] = u(S, frozenset(tau[:b]))
    m = np.empty((n, d))
    second = grid[1:, 1:] + grid[:-1, :-1] - grid[1:, :-1] - grid[:-1, 1:]
    m[np.ix_(sigma, tau)] = second
    return m


def mc_2d_shapley(u, n: int, d: int, num_samples: int, seed: int = 0):
    """Monte-Carlo cell Shapley values.

    Each sample draws a uniform row order and an independent uniform column
    order and credits every cell with its second difference given its
    predecessors.  Returns ``(estimate, standard_error)``.
    """
    if num_samples < 1:
        raise DataError("num_samples must be >= 1")
    u = _as_utility(u, Utility2D)
    g = rng(seed)
    total = np.zeros((n, d))
    total_sq = np.zeros((n, d))
    for _ in range(num_samples):
        m = _ordered_marginals(u, g.permutation(n), g.permutation(d))
        total += m
        total_sq += m * m
    mean = total / num_samples
    if num_samples > 1:
        var = np.maximum(total_sq - num_samples * mean * mean, 0.0) / (num_samples - 1)
        se = np.sqrt(var / num_samples)
    else:
        se = np.full((n, d), np.nan)
    return mean, se


def random_table_utility(n: int, d: int, seed: int) -> Utility2D:
    """A utility with an independent uniform value for every nonempty
    ``(S, F)`` pair; zero when either set is empty."""
    g = rng(seed)
    table = g.random((1 << n, 1 << d))

    def fn(S, F):
        return table[sum(1 << i for i in S), sum(1 << j for j in F)]

    return Utility2D(fn)
