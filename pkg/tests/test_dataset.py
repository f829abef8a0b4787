import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from redcut.dataset import Dataset, discretize, load_csv, load_sparse, make_splits, normalize
from redcut.errors import ConfigError, DataError


def test_csv_headerless_label_last(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1,2,yes\n3,4,no\n5,6,yes\n")
    d = load_csv(p)
    assert d.values.shape == (2, 3)
    np.testing.assert_array_equal(d.values[0], [1, 3, 5])
    np.testing.assert_array_equal(d.labels, [0, 1, 0])
    assert d.feature_names is None


def test_csv_header_and_named_label(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("cls,g1,g2\nA,0.5,1\nB,0.25,2\n")
    d = load_csv(p, label_column="cls")
    assert d.feature_names == ("g1", "g2")
    np.testing.assert_array_equal(d.values[1], [1, 2])


def test_csv_bad_cell_is_located(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("1,2,0\n3,x,1\n")
    with pytest.raises(DataError, match="row 2, column 2"):
        load_csv(p)


def test_csv_single_class_rejected(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1,2,0\n3,4,0\n")
    with pytest.raises(DataError, match="degenerate labels"):
        load_csv(p)


def test_sparse_roundtrip(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("+1 1:0.5 3:2\n-1 2:1.5\n+1 3:-1 # trailing comment\n")
    d = load_sparse(p)
    assert d.values.shape == (3, 3)
    np.testing.assert_array_equal(d.values[:, 0], [0.5, 0, 2])
    np.testing.assert_array_equal(d.values[:, 1], [0, 1.5, 0])
    np.testing.assert_array_equal(d.labels, [0, 1, 0])


@pytest.mark.parametrize("text, msg", [("1 0:1\n-1 1:2\n", "line 1"), ("1 1:1\n-1 a:2\n", "line 2"), ("", "no instances")])
def test_sparse_errors(tmp_path, text, msg):
    p = tmp_path / "f.txt"
    p.write_text(text)
    with pytest.raises(DataError, match=msg):
        load_sparse(p)


def test_normalize_range_and_constant():
    d = Dataset("n", np.array([[1.0, 3.0, 5.0], [2.0, 2.0, 2.0]]), [0, 1, 0])
    nd = normalize(d)
    np.testing.assert_array_equal(nd.values[0], [-1, 0, 1])
    np.testing.assert_array_equal(nd.values[1], [0, 0, 0])


@settings(max_examples=60, deadline=None)
@given(arrays(float, (3, 7), elements=st.floats(-1e6, 1e6)))
def test_normalize_idempotent(values):
    d = Dataset("h", values, [0, 1, 0, 1, 0, 1, 0])
    once = normalize(d)
    assert np.all(np.abs(once.values) <= 1.0)
    np.testing.assert_array_equal(normalize(once).values, once.values)


def test_discretize_boundaries_go_to_middle():
    # mean 0, population std 1 -> edges exactly -1 and 1
    v = np.array([[-1.0, 1.0, -1.0, 1.0]])
    codes = discretize(v).codes
    np.testing.assert_array_equal(codes, [[1, 1, 1, 1]])
    v2 = np.array([[-3.0, 0.0, 0.0, 3.0]])
    np.testing.assert_array_equal(discretize(v2).codes, [[0, 1, 1, 2]])


def test_discretize_constant_feature():
    np.testing.assert_array_equal(discretize(np.full((1, 5), 4.2)).codes, [[1] * 5])


@settings(max_examples=50, deadline=None)
@given(arrays(float, (2, 9), elements=st.floats(-100, 100)), st.floats(0.1, 10), st.floats(-5, 5))
def test_discretize_affine_invariant(values, a, b):
    c1 = discretize(values).codes
    c2 = discretize(values * a + b).codes
    # floating rounding can only move values sitting on a bin edge
    assert np.mean(c1 != c2) <= 2 / 9


def test_holdout_stratified_sizes_and_determinism():
    y = np.array([0] * 40 + [1] * 22)
    plan = make_splits(y, "holdout", seed=5, train_fraction=0.6, n_repeats=20)
    assert len(plan) == 20
    for train, test in plan:
        assert train.size == round(0.6 * 62)
        assert set(y[train]) == {0, 1}
        assert np.intersect1d(train, test).size == 0
        assert train.size + test.size == 62
    again = make_splits(y, "holdout", seed=5, train_fraction=0.6, n_repeats=20)
    for (a, b), (c, e) in zip(plan, again):
        np.testing.assert_array_equal(a, c)
        np.testing.assert_array_equal(b, e)


def test_loocv_and_errors():
    y = np.array([0, 1] * 31)
    plan = make_splits(y, "loocv")
    assert len(plan) == 62
    assert all(test.size == 1 for _, test in plan)
    with pytest.raises(DataError, match="single instance"):
        make_splits(np.array([0, 0, 1]), "holdout")
    with pytest.raises(ConfigError):
        make_splits(y, "kfold")
