from __future__ import annotations

import json

import numpy as np
import pytest

from cellval.io import (cell_scores_csv, pgm_p2, point_scores_csv, read_pgm_p2, read_score_csv,
                        report_json, scale_to_gray, write_atomic)


def test_atomic_write_replaces_and_leaves_no_temp(tmp_path):
    p = tmp_path / "sub" / "f.txt"
    write_atomic(p, "one")
    write_atomic(p, "two")
    assert p.read_text() == "two"
    assert [q.name for q in p.parent.iterdir()] == ["f.txt"]


def test_cell_csv_round_trip(tmp_path):
    s = np.array([[0.1, np.nan], [1 / 3, -0.0]])
    text = cell_scores_csv(s, ("a", "b"))
    assert text.splitlines()[:2] == ["a,b", "0.1,"]
    (tmp_path / "c.csv").write_text(text)
    back = read_score_csv(tmp_path / "c.csv")
    assert np.array_equal(back, s, equal_nan=True)


def test_point_csv():
    assert point_scores_csv(np.array([0.5, np.nan])) == "index,score\n0,0.5\n1,\n"


def test_gray_scaling():
    assert scale_to_gray(np.array([[1.0, 2.0], [3.0, np.nan]])).tolist() == [[0, 128], [255, 0]]
    assert scale_to_gray(np.full((2, 2), 4.0)).tolist() == [[0, 0], [0, 0]]


def test_pgm_round_trip(tmp_path):
    v = np.arange(6, dtype=float).reshape(2, 3)
    (tmp_path / "h.pgm").write_text(pgm_p2(v))
    assert (tmp_path / "h.pgm").read_text().startswith("P2\n3 2\n255\n")
    assert read_pgm_p2(tmp_path / "h.pgm").tolist() == [[0, 51, 102], [153, 204, 255]]


def test_report_rejects_nan():
    assert json.loads(report_json({"b": 1, "a": [0.5]})) == {"a": [0.5], "b": 1}
    with pytest.raises(ValueError):
        report_json({"x": float("nan")})
