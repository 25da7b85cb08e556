from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtl.data import (
    AngleScaler,
    DataFormatError,
    Dataset,
    SplitSpec,
    gen_synthetic,
    load_features,
    rescale_to_angles,
    save_features,
    split,
)


def test_synthetic_shape_and_balance():
    ds = gen_synthetic(100, 3, 0.5, seed=7)
    assert len(ds) == 100 and ds.feature_dim == 3 and ds.class_count == 2
    assert np.bincount(ds.labels).tolist() == [50, 50]


def test_synthetic_rejects_odd_n():
    with pytest.raises(ValueError):
        gen_synthetic(99)


def test_synthetic_deterministic():
    a, b = gen_synthetic(seed=3), gen_synthetic(seed=3)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)


@pytest.mark.parametrize("sep", [0.0, 0.25, 1.0])
def test_synthetic_class_means_within_clt_bound(sep):
    sigma = 0.5
    ds = gen_synthetic(100, 3, sigma, sep, seed=11)
    for c, sign in ((0, 1), (1, -1)):
        mean = ds.features[ds.labels == c].mean(axis=0)
        target = np.array([sign * sep, 0, 0])
        assert np.all(np.abs(mean - target) <= 4 * sigma / np.sqrt(50))


def test_zero_separation_is_symmetric():
    # labels carry no information: swapping them gives the same distribution of means
    ds = gen_synthetic(20000, 3, 0.5, 0.0, seed=1)
    m0 = ds.features[ds.labels == 0].mean(axis=0)
    m1 = ds.features[ds.labels == 1].mean(axis=0)
    assert np.all(np.abs(m0 - m1) < 4 * 0.5 * np.sqrt(2 / 10000))


def test_feature_file_round_trip(tmp_path):
    ds = gen_synthetic(8, 4, seed=2)
    path = tmp_path / "f.csv"
    save_features(ds, path, comments=["hello"])
    back = load_features(path)
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.labels, ds.labels)
    assert (back.class_count, back.feature_dim, len(back)) == (2, 4, 8)


def test_load_echoes_input(tmp_path):
    rows = ["classes=2,features=4"] + [f"{i % 2},{i},{i + 0.5},-1,2e-3" for i in range(8)]
    path = tmp_path / "f.csv"
    path.write_text("# comment\n" + "\n".join(rows) + "\n")
    ds = load_features(path)
    assert (ds.feature_dim, ds.class_count, len(ds)) == (4, 2, 8)
    assert ds.features[3].tolist() == [3.0, 3.5, -1.0, 0.002]


@pytest.mark.parametrize("body, match", [
    ("", "no header"),
    ("classes=2,features=2\n", "no data rows"),
    ("classes=2,features=2\n0,1.0\n", "line 2"),
    ("classes=2,features=2\n0,1.0,2.0\n0,x,1\n", "line 3"),
    ("classes=2,features=2\n2,1.0,2.0\n", "label 2"),
    ("classes=two,features=2\n", "line 1"),
])
def test_load_errors(tmp_path, body, match):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(DataFormatError, match=match):
        load_features(path)


def test_rescale_examples():
    ds = Dataset(np.array([[0.0, 5.0], [1.0, 5.0], [2.0, 5.0]]), np.zeros(3, int), 1)
    out = rescale_to_angles(ds)
    np.testing.assert_allclose(out.features[:, 0], [0, np.pi / 2, np.pi])
    np.testing.assert_allclose(out.features[:, 1], np.pi / 2)


def test_rescale_clamps_test_values():
    train = Dataset(np.array([[0.0], [2.0]]), np.zeros(2, int), 1)
    scaler = AngleScaler.fit(train)
    test = Dataset(np.array([[-1.0], [1.0], [5.0]]), np.zeros(3, int), 1)
    np.testing.assert_allclose(rescale_to_angles(test, scaler=scaler).features[:, 0], [0, np.pi / 2, np.pi])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=20), st.floats(-1e7, 1e7))
def test_rescale_bounded(values, probe):
    train = Dataset(np.array(values)[:, None], np.zeros(len(values), int), 1)
    scaler = AngleScaler.fit(train)
    out = scaler.transform(np.array([[probe]] + [[v] for v in values]))
    assert np.all((out >= 0) & (out <= np.pi))


def test_split_uc_merced_sizes():
    labels = np.repeat([0, 1, 2], 96)
    ds = Dataset(np.arange(288.0)[:, None], labels, 3)
    train, test = split(ds, SplitSpec(201, 87, seed=0))
    assert len(train) == 201 and len(test) == 87
    for c in range(3):
        assert abs(np.sum(train.labels == c) - 201 / 3) <= 1
        assert abs(np.sum(test.labels == c) - 87 / 3) <= 1


def test_split_balanced_halves():
    ds = gen_synthetic(100, seed=4)
    train, test = split(ds, SplitSpec(50, 50, seed=1))
    assert np.bincount(train.labels).tolist() == [25, 25]
    assert np.bincount(test.labels).tolist() == [25, 25]


def test_split_rejects_singleton_class():
    ds = Dataset(np.zeros((5, 1)), np.array([0, 0, 0, 0, 1]), 2)
    with pytest.raises(ValueError):
        split(ds, SplitSpec(3, 2))


def test_split_rejects_bad_counts():
    with pytest.raises(ValueError):
        split(gen_synthetic(10), SplitSpec(5, 4))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=8, max_size=60), st.integers(0, 1000), st.data())
def test_split_is_stratified_partition(labels, seed, data):
    labels = np.array(labels)
    counts = np.bincount(labels, minlength=4)
    if np.any((counts > 0) & (counts < 2)):
        return
    n = len(labels)
    present = int(np.sum(counts > 0))
    train_count = data.draw(st.integers(present, n - present))
    ds = Dataset(np.arange(n, dtype=float)[:, None], labels, 4)
    train, test = split(ds, SplitSpec(train_count, n - train_count, seed))
    ids = train.features[:, 0].tolist() + test.features[:, 0].tolist()
    assert Counter(ids) == Counter(range(n))
    again = split(ds, SplitSpec(train_count, n - train_count, seed))
    np.testing.assert_array_equal(again[0].features, train.features)
    for c in np.flatnonzero(counts):
        share = counts[c] * train_count / n
        if 1 <= share <= counts[c] - 1:
            assert abs(np.sum(train.labels == c) - share) <= 1 + 1e-9
