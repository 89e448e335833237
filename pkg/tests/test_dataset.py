import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tmixad.dataset import (
    DataError,
    Dataset,
    SplitSpec,
    StandardizationStats,
    generate_group_anomaly_toy,
    load_csv,
    split_inductive,
    standardize_fit_apply,
    write_csv,
)


@pytest.fixture
def small_csv(tmp_path):
    path = tmp_path / "small.csv"
    path.write_text("a,b,label\n0,0,0\n1,1,0\n9,9,1\n")
    return path


def test_load_with_labels(small_csv):
    ds = load_csv(small_csv, label_column="label")
    assert ds.features.shape == (3, 2)
    np.testing.assert_array_equal(ds.features, [[0, 0], [1, 1], [9, 9]])
    np.testing.assert_array_equal(ds.labels, [0, 0, 1])
    assert ds.columns == ("a", "b")


def test_load_without_label_column_keeps_it_as_feature(small_csv):
    ds = load_csv(small_csv)
    assert ds.features.shape == (3, 3)
    assert ds.labels is None


def test_non_numeric_cell_names_row_and_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,label\n1,x,0\n")
    with pytest.raises(DataError, match=r"row 1, column 'b'"):
        load_csv(path, label_column="label")


@pytest.mark.parametrize(
    "text, label, match",
    [
        ("a,b\n1,2\n3\n", None, "ragged row 2"),
        ("a,label\n1,2\n", "label", "not 0 or 1"),
        ("a,b\n1,2\n", "label", "not found"),
        ("a,b\n1,nan\n", None, "non-finite"),
    ],
)
def test_load_errors(tmp_path, text, label, match):
    path = tmp_path / "f.csv"
    path.write_text(text)
    with pytest.raises(DataError, match=match):
        load_csv(path, label_column=label)


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="no such file"):
        load_csv(tmp_path / "nope.csv")


def test_dataset_rejects_bad_labels():
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 1)), np.array([0, 2]))
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 1)), np.array([0]))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 4)),
              elements=st.floats(-1e6, 1e6, allow_nan=False, width=64)))
def test_csv_round_trip_is_bitwise(tmp_path_factory, X):
    path = tmp_path_factory.mktemp("rt") / "x.csv"
    write_csv(Dataset(X), path)
    back = load_csv(path)
    np.testing.assert_array_equal(back.features, X)


def test_standardize_symmetric_column():
    (tr,), stats = standardize_fit_apply(Dataset(np.array([[0.0], [2.0]])))
    assert stats.mean[0] == 1.0 and stats.std[0] == 1.0
    np.testing.assert_array_equal(tr.features[:, 0], [-1.0, 1.0])


def test_standardize_underflowing_spread():
    (tr,), stats = standardize_fit_apply(Dataset(np.array([[0.0], [1e-168]])))
    assert stats.std[0] == 1.0
    assert np.all(np.isfinite(tr.features))


def test_standardize_constant_column():
    (tr,), stats = standardize_fit_apply(Dataset(np.array([[5.0], [5.0], [5.0]])))
    assert stats.std[0] == 1.0
    np.testing.assert_array_equal(tr.features[:, 0], [0.0, 0.0, 0.0])


def test_standardize_uses_train_stats_on_others():
    stats = StandardizationStats(np.array([1.0]), np.array([2.0]))
    assert stats.apply(np.array([[5.0]]))[0, 0] == 2.0
    # population std of [-1, 3] is 2 and mean 1
    (_, te), st_ = standardize_fit_apply(Dataset(np.array([[-1.0], [3.0]])), [Dataset(np.array([[5.0]]))])
    assert st_.std[0] == 2.0
    assert te.features[0, 0] == 2.0


def test_standardize_dimension_mismatch():
    with pytest.raises(DataError, match="dimension mismatch"):
        standardize_fit_apply(Dataset(np.zeros((2, 2))), [Dataset(np.zeros((2, 3)))])


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 5)),
              elements=st.floats(-1e3, 1e3, allow_nan=False, width=64)))
def test_standardized_train_moments(X):
    (tr,), _ = standardize_fit_apply(Dataset(X))
    Z = tr.features
    np.testing.assert_allclose(Z.mean(axis=0), 0.0, atol=1e-9)
    nonconst = np.ptp(X, axis=0) > 1e-6 * np.maximum(1.0, np.abs(X).max(axis=0))
    np.testing.assert_allclose(Z.std(axis=0)[nonconst], 1.0, atol=1e-9)


def _labelled(n, n_pos):
    y = np.zeros(n, dtype=int)
    y[:n_pos] = 1
    return Dataset(np.arange(n, dtype=float)[:, None], y)


def test_split_sizes():
    tr, te = split_inductive(_labelled(10, 2), SplitSpec(0.7, 0, stratified=False))
    assert (tr.n, te.n) == (7, 3)


def test_split_deterministic():
    ds = _labelled(50, 5)
    a = split_inductive(ds, SplitSpec(0.7, 3))
    b = split_inductive(ds, SplitSpec(0.7, 3))
    np.testing.assert_array_equal(a[0].features, b[0].features)
    np.testing.assert_array_equal(a[1].features, b[1].features)


@pytest.mark.parametrize("seed", range(10))
def test_stratified_half_split_puts_one_anomaly_each_side(seed):
    tr, te = split_inductive(_labelled(10, 2), SplitSpec(0.5, seed, stratified=True))
    assert tr.labels.sum() == 1 and te.labels.sum() == 1


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 80), st.integers(0, 80), st.floats(0.05, 0.95), st.integers(0, 2**32 - 1), st.booleans())
def test_split_is_partition(n, n_pos, frac, seed, stratified):
    n_pos = min(n_pos, n)
    ds = _labelled(n, n_pos)
    try:
        tr, te = split_inductive(ds, SplitSpec(frac, seed, stratified))
    except DataError:
        assert int(n * frac + 1e-9) == 0
        return
    ids = np.r_[tr.features[:, 0], te.features[:, 0]]
    assert sorted(ids) == list(range(n))
    if stratified and te.n:
        expected = n_pos * tr.n / n
        assert abs(tr.labels.sum() - expected) <= 1 + 1e-9


def test_split_errors():
    with pytest.raises(DataError, match="without|no labels"):
        split_inductive(Dataset(np.zeros((4, 1))), SplitSpec(0.5, 0, True))
    with pytest.raises(DataError, match="empty train"):
        split_inductive(_labelled(3, 1), SplitSpec(0.1, 0, False))
    with pytest.raises(DataError):
        SplitSpec(0.0)
    with pytest.raises(DataError):
        SplitSpec(1.0)


def test_toy_shape_and_labels():
    ds = generate_group_anomaly_toy(5)
    assert ds.features.shape == (930, 2)
    assert ds.labels.sum() == 30


def test_toy_deterministic():
    np.testing.assert_array_equal(generate_group_anomaly_toy(1).features, generate_group_anomaly_toy(1).features)
    assert not np.array_equal(generate_group_anomaly_toy(1).features, generate_group_anomaly_toy(2).features)


@pytest.mark.parametrize("seed", range(3))
def test_toy_anomalies_are_tighter_than_every_normal_cluster(seed):
    X = generate_group_anomaly_toy(seed).features
    group_var = X[900:].var(axis=0, ddof=1).sum()
    for c in range(3):
        assert group_var < X[c * 300:(c + 1) * 300].var(axis=0, ddof=1).sum()
