from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cellval.data import (Dataset, apply_flips, dumps_csv, flip_labels, load_csv, normalize,
                          prepare, split, split_indices, synth_gaussian)
from cellval.errors import DataError
from cellval.learners import accuracy, fit_logistic

from conftest import make_ds


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_small_file(tmp_path):
    ds = load_csv(write(tmp_path, "a,b,y\n1,2,0\n3,4,1\n5,6,0\n"))
    assert (ds.n, ds.d, ds.n_classes) == (3, 2, 2)
    assert ds.feature_names == ("a", "b")
    assert np.array_equal(ds.features, [[1, 2], [3, 4], [5, 6]])


def test_nan_field_reports_position(tmp_path):
    with pytest.raises(DataError, match="line 3, column 2"):
        load_csv(write(tmp_path, "a,b,y\n1,2,0\n3,NaN,1\n"))


def test_unparseable_field_reports_position(tmp_path):
    with pytest.raises(DataError, match="line 2, column 1"):
        load_csv(write(tmp_path, "a,b,y\nx,2,0\n3,4,1\n"))


def test_first_appearance_encoding(tmp_path):
    ds = load_csv(write(tmp_path, "a,y\n1,cat\n2,dog\n3,cat\n"))
    assert ds.labels.tolist() == [0, 1, 0]
    assert ds.class_names == ("cat", "dog")


def test_ragged_and_single_class_rejected(tmp_path):
    with pytest.raises(DataError, match="fields"):
        load_csv(write(tmp_path, "a,b,y\n1,2,0\n3,1\n"))
    with pytest.raises(DataError, match="one class"):
        load_csv(write(tmp_path, "a,y\n1,0\n2,0\n"))


def test_label_column_by_name_and_index(tmp_path):
    p = write(tmp_path, "y,a,b\n0,1,2\n1,3,4\n")
    assert load_csv(p, "y").feature_names == ("a", "b")
    assert load_csv(p, 0).feature_names == ("a", "b")
    with pytest.raises(DataError):
        load_csv(p, "nope")


def test_dataset_invariants():
    with pytest.raises(DataError):
        make_ds([[1.0, np.inf]], [0])
    with pytest.raises(DataError):
        make_ds([[1.0]], [2])
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 2)), [0, 1], ("a", "a"), 2)
    ds = make_ds([[1.0]], [0])
    with pytest.raises(ValueError):
        ds.features[0, 0] = 2.0


@given(arrays(np.float64, st.tuples(st.integers(2, 8), st.integers(1, 4)),
              elements=st.floats(-1e6, 1e6, allow_nan=False)),
       st.data())
def test_csv_round_trip(tmp_path_factory, X, data):
    y = data.draw(arrays(np.int64, X.shape[0], elements=st.integers(0, 1)))
    y[0], y[-1] = 0, 1
    ds = make_ds(X, y)
    p = tmp_path_factory.mktemp("rt") / "ds.csv"
    p.write_text(dumps_csv(ds))
    back = load_csv(p)
    assert back.equals(ds)


def test_normalize_hand_values():
    ds = make_ds([[1.0, 5.0], [3.0, 5.0]], [0, 1])
    out, params = normalize(ds)
    assert out.features[:, 0].tolist() == [-1.0, 1.0]
    assert out.features[:, 1].tolist() == [0.0, 0.0]
    assert params.stds[1] == 1e-12


def test_subnormal_spread_is_floored():
    out, params = normalize(make_ds([[2.2e-311], [0.0], [0.0]], [0, 1, 0]))
    assert np.all(np.isfinite(out.features))
    assert params.stds[0] == 1e-12


def test_constant_column_three_rows():
    out, _ = normalize(make_ds([[5.0], [5.0], [5.0]], [0, 1, 0]))
    assert out.features.ravel().tolist() == [0, 0, 0]


@given(arrays(np.float64, st.tuples(st.integers(3, 20), st.integers(1, 5)),
              elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_normalize_idempotent_and_invertible(X):
    y = np.arange(len(X)) % 2
    ds = make_ds(X, y)
    once, params = normalize(ds)
    twice, _ = normalize(once)
    varying = X.std(axis=0) > 1e-6 * (1 + np.abs(X).max())
    assert np.allclose(twice.features[:, varying], once.features[:, varying], atol=1e-9)
    back = params.invert(once).features
    assert np.allclose(back[:, varying], X[:, varying], rtol=1e-9, atol=1e-9 * (1 + np.abs(X).max()))


def test_split_partitions():
    a, b = split_indices(10, 7, 3, 1)
    assert sorted(np.concatenate([a, b]).tolist()) == list(range(10))
    a2, b2 = split_indices(10, 7, 3, 1)
    assert np.array_equal(a, a2) and np.array_equal(b, b2)
    with pytest.raises(DataError):
        split_indices(10, 8, 3, 1)


@given(st.integers(2, 60), st.data())
def test_split_disjoint(n, data):
    n_train = data.draw(st.integers(1, n - 1))
    n_test = data.draw(st.integers(0, n - n_train))
    a, b = split_indices(n, n_train, n_test, data.draw(st.integers(0, 2**64 - 1)))
    assert len(set(a.tolist()) | set(b.tolist())) == n_train + n_test


def test_prepare_uses_train_statistics():
    pool = synth_gaussian(200, 3, 1.0, 0)
    train, test, params = prepare(pool, 150, 50, 7)
    assert np.allclose(train.features.mean(axis=0), 0, atol=1e-12)
    raw_train, raw_test = split(pool, 150, 50, 7)
    assert np.allclose(test.features, (raw_test.features - params.means) / params.stds)


def test_flip_exact_count():
    ds = synth_gaussian(1000, 2, 1.0, 0)
    noisy, mask = flip_labels(ds, 0.10, 4)
    assert mask.sum() == 100
    assert np.array_equal(noisy.labels != ds.labels, mask)
    assert np.array_equal(noisy.features, ds.features)
    assert apply_flips(noisy, mask).equals(ds)


def test_zero_flips():
    ds = synth_gaussian(10, 2, 1.0, 0)
    noisy, mask = flip_labels(ds, 0.04, 1)
    assert not mask.any() and noisy.equals(ds)


def test_flip_needs_binary():
    ds = make_ds([[0.0], [1.0], [2.0]], [0, 1, 2], n_classes=3)
    with pytest.raises(DataError):
        flip_labels(ds, 0.5, 0)


@given(st.integers(2, 300), st.floats(0.01, 0.99), st.integers(0, 2**32))
def test_flip_count_property(n, ratio, seed):
    ds = synth_gaussian(n, 1, 1.0, 0)
    _, mask = flip_labels(ds, ratio, seed)
    assert mask.sum() == int(np.floor(ratio * n + 0.5))


def test_synth_deterministic():
    assert synth_gaussian(50, 4, 2.0, 9).equals(synth_gaussian(50, 4, 2.0, 9))


def test_synth_separation_controls_accuracy():
    for sep, lo, hi in ((0.0, 0.45, 0.55), (4.0, 0.95, 1.0)):
        train = synth_gaussian(2000, 20, sep, 1)
        test = synth_gaussian(2000, 20, sep, 2)
        acc = accuracy(fit_logistic(train.features, train.labels), test)
        assert lo <= acc <= hi, (sep, acc)
