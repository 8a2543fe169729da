"""Artifact writers.  Every file is written to a temporary sibling and then
renamed into place, so readers never see a partial file."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import DataError


def write_atomic(path, data: str | bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(v: float) -> str:
    # repr round-trips exactly; missing values become empty fields
    return "" if np.isnan(v) else repr(float(v))


def cell_scores_csv(scores: np.ndarray, feature_names) -> str:
    """Header of feature names, then one row of scores per data point."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[1] != len(feature_names):
        raise DataError("cell score matrix does not match the feature names")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(feature_names)
    for row in scores:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def point_scores_csv(scores: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "score"])
    for i, v in enumerate(np.asarray(scores, dtype=np.float64)):
        w.writerow([i, _fmt(v)])
    return buf.getvalue()


def read_score_csv(path) -> np.ndarray:
    """Parse a score CSV written above back into a float array (NaN for
    empty fields); the header row is skipped."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array([[float(v) if v else np.nan for v in r] for r in rows], dtype=np.float64)


def scale_to_gray(values: np.ndarray) -> np.ndarray:
    """Min-max scale to integers 0..255.  Missing values map to 0 and a
    constant image is all 0."""
    v = np.asarray(values, dtype=np.float64)
    present = ~np.isnan(v)
    out = np.zeros(v.shape, dtype=np.int64)
    if not present.any():
        return out
    lo, hi = v[present].min(), v[present].max()
    if hi > lo:
        out[present] = np.rint((v[present] - lo) / (hi - lo) * 255).astype(np.int64)
    return out


def pgm_p2(values: np.ndarray) -> str:
    """Plain-text PGM of a 2-D array, scaled per image."""
    g = scale_to_gray(values)
    if g.ndim != 2:
        raise DataError("heatmap must be 2-D")
    h, w = g.shape
    lines = ["P2", f"{w} {h}", "255"]
    lines += [" ".join(str(int(x)) for x in row) for row in g]
    return "\n".join(lines) + "\n"


def read_pgm_p2(path) -> np.ndarray:
    tokens = [t for line in Path(path).read_text().splitlines()
              if not line.startswith("#") for t in line.split()]
    if tokens[0] != "P2":
        raise DataError("not a plain PGM file")
    w, h, _ = int(tokens[1]), int(tokens[2]), int(tokens[3])
    return np.array(tokens[4:4 + w * h], dtype=np.int64).reshape(h, w)


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"
