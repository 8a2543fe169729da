"""Ranking metrics: detection-rate curves and precision-recall area."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError

ORDERS = ("ascending", "descending")


@dataclass(frozen=True, eq=False)
class DetectionCurve:
    """Detection rate as a function of the inspected fraction.

    ``fractions`` and ``rates`` start at (0, 0) and end at (1, 1).  Entries
    with missing scores are left out of the ranking and counted in
    ``n_excluded`` / ``n_excluded_true``.
    """

    fractions: np.ndarray
    rates: np.ndarray
    auc: float
    n_excluded: int = 0
    n_excluded_true: int = 0

    def to_dict(self) -> dict:
        return {"auc": self.auc, "fractions": self.fractions.tolist(),
                "rates": self.rates.tolist(), "n_excluded": self.n_excluded,
                "n_excluded_true": self.n_excluded_true}


def stable_ranking(scores, order: str = "ascending") -> np.ndarray:
    """Indices sorted by score; equal scores keep their original order."""
    if order not in ORDERS:
        raise DataError(f"order must be one of {ORDERS}, got {order!r}")
    s = np.asarray(scores, dtype=np.float64)
    key = s if order == "ascending" else -s
    return np.argsort(key, kind="stable")


def _prepare(scores, truth):
    s = np.asarray(scores, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=bool).ravel()
    if s.shape != t.shape:
        raise DataError(f"scores and truth differ in length ({s.size} vs {t.size})")
    keep = ~np.isnan(s)
    return s[keep], t[keep], int((~keep).sum()), int(t[~keep].sum())


def detection_curve(scores, truth, order: str = "ascending", max_points: int | None = None) -> DetectionCurve:
    """Walk the ranking and record the fraction of true entries found.

    The area uses the trapezoid rule over every step including (0, 0).
    ``max_points`` thins the stored coordinates (not the area) for reports.
    """
    s, t, n_ex, n_ex_true = _prepare(scores, truth)
    total = int(t.sum())
    if total == 0:
        raise DataError("detection curve needs at least one true entry")
    hits = t[stable_ranking(s, order)]
    m = len(hits)
    rates = np.concatenate([[0.0], np.cumsum(hits) / total])
    fractions = np.arange(m + 1) / m
    auc = float(np.sum((rates[1:] + rates[:-1]) * 0.5) / m)
    if max_points is not None and m + 1 > max_points:
        keep = np.unique(np.linspace(0, m, max_points).round().astype(int))
        fractions, rates = fractions[keep], rates[keep]
    return DetectionCurve(fractions, rates, auc, n_ex, n_ex_true)


def ideal_auc(prevalence: float) -> float:
    """Area of the curve when every true entry is ranked first."""
    return 1.0 - prevalence / 2.0


def aucpr(scores, truth, order: str = "ascending") -> float:
    """Average precision: sum of precision at each true hit, divided by the
    number of true entries."""
    s, t, _, _ = _prepare(scores, truth)
    total = int(t.sum())
    if total == 0:
        raise DataError("AUCPR needs at least one positive")
    hits = t[stable_ranking(s, order)]
    precision = np.cumsum(hits) / np.arange(1, len(hits) + 1)
    return float(precision[hits].sum() / total)
