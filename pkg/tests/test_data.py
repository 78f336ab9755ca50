import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dasga.exceptions import ConfigurationError, InvalidParameterError, ParseError
from dasga.data import (
    PRESETS,
    LabeledDataset,
    load_csv_features,
    load_labels,
    make_preset,
    misclassification_rate,
    rms_error,
    sample_split,
    synth_gaussian_pair,
    write_csv_features,
    write_labels,
)

MEANS = PRESETS["synth1"]["means"]


def test_synth_shapes_and_mirrored_means():
    src, tgt = synth_gaussian_pair(100, MEANS, 1.0, seed=0)
    assert src.features.shape == (200, 3) and tgt.features.shape == (200, 3)
    np.testing.assert_array_equal(src.labels, np.repeat([0, 1], 100))
    tiny_s, tiny_t = synth_gaussian_pair(3, MEANS, 1e-40, seed=0)
    np.testing.assert_allclose(tiny_s.features, np.repeat(MEANS, 3, axis=0), atol=1e-15)
    mirrored = np.array(MEANS) * [1, -1, 1]
    np.testing.assert_allclose(tiny_t.features, np.repeat(mirrored, 3, axis=0), atol=1e-15)


def test_synth_deterministic_and_validated():
    a = synth_gaussian_pair(10, MEANS, 2.0, seed=5)
    b = synth_gaussian_pair(10, MEANS, 2.0, seed=5)
    assert a[0].features.tobytes() == b[0].features.tobytes()
    assert a[1].features.tobytes() == b[1].features.tobytes()
    with pytest.raises(InvalidParameterError):
        synth_gaussian_pair(10, MEANS, 0.0, seed=0)
    with pytest.raises(InvalidParameterError):
        synth_gaussian_pair(10, [(0, 0, 0)], 1.0, seed=0)


def test_synth_sample_means_monte_carlo():
    n, var = 100, 2.25
    bound = 3 * np.sqrt(var) / np.sqrt(n)
    within = total = 0
    mirrored = np.array(MEANS) * [1, -1, 1]
    for seed in range(1000):
        for ds, means in zip(synth_gaussian_pair(n, MEANS, var, seed), (np.array(MEANS), mirrored)):
            for c in (0, 1):
                dev = np.abs(ds.features[ds.labels == c].mean(axis=0) - means[c])
                within += int(np.sum(dev <= bound))
                total += dev.size
    assert within / total >= 0.99


def test_presets():
    s1, t1 = make_preset("synth1", 0)
    assert s1.n + t1.n == 400
    with pytest.raises(ConfigurationError):
        make_preset("synth9", 0)


def test_dataset_validation():
    with pytest.raises(InvalidParameterError):
        LabeledDataset(np.zeros(3))
    with pytest.raises(InvalidParameterError):
        LabeledDataset(np.zeros(3), np.zeros((4, 2)))


def test_split_examples():
    src, _ = make_preset("synth1", 0)
    full = sample_split(src, 1.0, 0)
    assert len(full.known) == 200 and full.hidden.size == 0
    tiny = sample_split(src, 0.01, 3)
    np.testing.assert_array_equal(np.sort(src.labels[tiny.known.indices]), [0, 1])
    again = sample_split(src, 0.01, 3)
    np.testing.assert_array_equal(tiny.known.indices, again.known.indices)
    with pytest.raises(ConfigurationError, match="class"):
        sample_split(src, 0.004, 0)
    with pytest.raises(InvalidParameterError):
        sample_split(src, 0.0, 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 1.0), st.integers(0, 10_000))
def test_split_partitions_and_stratifies(ratio, seed):
    src, _ = make_preset("synth2", 1, n_per_class=30)
    split = sample_split(src, ratio, seed)
    both = np.concatenate([split.known.indices, split.hidden])
    np.testing.assert_array_equal(np.sort(both), np.arange(src.n))
    assert set(src.labels[split.known.indices]) == {0, 1}
    np.testing.assert_array_equal(split.known.values, src.labels[split.known.indices])


def test_regression_split_uniform():
    ds = LabeledDataset(np.linspace(0, 1, 50), np.zeros((50, 1)), task="regression")
    split = sample_split(ds, 0.1, 0)
    assert len(split.known) == 5 and split.known.encoding == "regression"


def test_misclassification_examples(rng):
    truth = np.array([0, 1, 2, 1])
    assert misclassification_rate(truth, truth) == 0.0
    assert misclassification_rate((truth + 1) % 3, truth) == 1.0
    pred = rng.integers(0, 3, 40)
    t = rng.integers(0, 3, 40)
    idx = np.arange(0, 40, 3)
    wrong = sum(1 for i in idx if pred[i] != t[i])
    assert misclassification_rate(pred, t, idx) == wrong / idx.size


def test_rms_examples(rng):
    v = rng.standard_normal(10)
    assert rms_error(v, v) == 0.0
    assert rms_error(v + 0.7, v) == pytest.approx(0.7)
    a, b = rng.standard_normal(30), rng.standard_normal(30)
    naive = 0.0
    for x, y in zip(a, b):
        naive += (x - y) ** 2
    assert rms_error(a, b) == pytest.approx(np.sqrt(naive / 30), rel=1e-14)
    with pytest.raises(InvalidParameterError):
        rms_error(a, b, [])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_metrics_ignore_index_order(seed):
    rng = np.random.default_rng(seed)
    p, t = rng.integers(0, 3, 25), rng.integers(0, 3, 25)
    idx = rng.choice(25, size=10, replace=False)
    perm = rng.permutation(idx)
    assert misclassification_rate(p, t, idx) == misclassification_rate(p, t, perm)
    assert rms_error(p, t, idx) == pytest.approx(rms_error(p, t, perm), rel=1e-15)


def test_csv_features(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("1,2\n3,4\n")
    np.testing.assert_array_equal(load_csv_features(p), [[1, 2], [3, 4]])
    p.write_text("a,b\n1,2\n")
    np.testing.assert_array_equal(load_csv_features(p, header=True), [[1, 2]])
    p.write_text("1,2\n3,4,5\n")
    with pytest.raises(ParseError, match="line 2"):
        load_csv_features(p)
    p.write_text("1,2\n3,x\n")
    with pytest.raises(ParseError, match="line 2"):
        load_csv_features(p)


def test_csv_roundtrip(tmp_path, rng):
    X = rng.standard_normal((7, 3))
    write_csv_features(X, tmp_path / "x.csv")
    np.testing.assert_array_equal(load_csv_features(tmp_path / "x.csv"), X)
    y = rng.integers(0, 4, 7)
    write_labels(y, tmp_path / "y.csv")
    np.testing.assert_array_equal(load_labels(tmp_path / "y.csv"), y)
    yf = np.array([0.25, np.nan, -3.5])
    write_labels(yf, tmp_path / "yf.csv")
    np.testing.assert_array_equal(load_labels(tmp_path / "yf.csv"), yf)
    (tmp_path / "bad.csv").write_text("1\nabc\n")
    with pytest.raises(ParseError, match="line 2"):
        load_labels(tmp_path / "bad.csv")
