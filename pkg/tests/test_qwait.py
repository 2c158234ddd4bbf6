import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridsched.batchsim import QueueSnapshot
from gridsched.qwait import (NOISE, History, HistoryRecord, PredictorParams, dbscan, featurize,
                             fit_ridge, predict_wait, standardize)
from gridsched.workload import Job


def test_featurize_empty_snapshot():
    v = featurize(Job(1, 0, 10, 20, 4, "a"), QueueSnapshot())
    assert v == (4.0, 20.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def test_featurize_stable():
    j, s = Job(1, 0, 10, 20, 4, "a"), QueueSnapshot(1, 2, 3, 4, 5, 6)
    assert repr(featurize(j, s)) == repr(featurize(j, s))
    assert featurize(j, s) == featurize(Job(2, 9, 10, 20, 4, "b"), s)


def test_identical_history_returns_cluster_mean():
    rec = HistoryRecord((8.0, 3600.0, 1, 2, 3, 4, 5, 6), 100.0)
    assert predict_wait(rec.features, [rec] * 50) == 100.0


def test_single_record():
    assert predict_wait((1.0,) * 8, [HistoryRecord((5.0,) * 8, 42.0)]) == 42.0


def test_empty_history_raises():
    with pytest.raises(ValueError):
        predict_wait((1.0,) * 8, [])


def _linear_history(rng, n):
    X = rng.uniform(1, 100, size=(n, 8))
    return [HistoryRecord(tuple(x), 2.0 * x[0]) for x in X]


def test_ridge_path_recovers_linear_relation():
    rng = np.random.default_rng(0)
    hist = _linear_history(rng, 200)
    params = PredictorParams(similarity_threshold=0.0, ridge_lambda=1e-9)
    for x in rng.uniform(1, 100, size=(20, 8)):
        assert predict_wait(tuple(x), hist, params) == pytest.approx(2.0 * x[0], rel=0.01)


def test_ridge_zero_lambda_equals_least_squares():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 8))
    y = X @ rng.normal(size=8) + 3.0 + rng.normal(scale=0.1, size=60)
    b0, beta = fit_ridge(X, y, 0.0)
    ref = np.linalg.lstsq(np.column_stack([np.ones(60), X]), y, rcond=None)[0]
    np.testing.assert_allclose(np.r_[b0, beta], ref, rtol=1e-6)


def test_ridge_shrinks_with_lambda():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(40, 3))
    y = X @ np.array([1.0, -2.0, 0.5])
    norms = [np.linalg.norm(fit_ridge(X, y, lam)[1]) for lam in (0.0, 1.0, 100.0)]
    assert norms[0] > norms[1] > norms[2]


def test_dbscan_two_blobs_and_noise():
    pts = np.array([[0, 0], [0.1, 0], [0, 0.1], [0.1, 0.1],
                    [5, 5], [5.1, 5], [5, 5.1], [5.1, 5.1],
                    [20, 20]])
    labels = dbscan(pts, eps=0.5, min_pts=3)
    assert list(labels) == [0, 0, 0, 0, 1, 1, 1, 1, NOISE]


def test_dbscan_manhattan_metric():
    pts = np.array([[0.0, 0.0], [0.3, 0.3]])
    # Euclidean distance 0.42 < 0.5, Manhattan 0.6 > 0.5
    assert list(dbscan(pts, 0.5, 2)) == [NOISE, NOISE]
    assert list(dbscan(pts, 0.6, 2)) == [0, 0]


def test_standardize_constant_column():
    X = np.array([[1.0, 5.0], [3.0, 5.0]])
    Xs, mean, scale = standardize(X)
    assert scale[1] == 1.0 and np.all(Xs[:, 1] == 0)


def test_history_window():
    h = History(PredictorParams(history_window=3))
    for w in range(5):
        h.add((w,) * 8, w)
    assert len(h) == 3 and [r.observed_wait for r in h.records] == [2, 3, 4]


records_st = st.lists(
    st.tuples(st.lists(st.integers(0, 20), min_size=8, max_size=8), st.integers(0, 5000)),
    min_size=2, max_size=40)


@settings(max_examples=100, deadline=None)
@given(records_st, st.lists(st.integers(0, 20), min_size=8, max_size=8), st.randoms(use_true_random=False))
def test_permutation_invariance(rows, target, rnd):
    hist = [HistoryRecord(tuple(float(v) for v in f), float(w)) for f, w in rows]
    shuffled = list(hist)
    rnd.shuffle(shuffled)
    a = predict_wait(tuple(target), hist)
    b = predict_wait(tuple(target), shuffled)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-9)
    assert a >= 0


@settings(max_examples=100, deadline=None)
@given(records_st, st.lists(st.integers(0, 20), min_size=8, max_size=8),
       st.lists(st.sampled_from([0.5, 2.0, 10.0, 1000.0]), min_size=8, max_size=8))
def test_feature_scaling_invariance(rows, target, k):
    k = np.array(k)
    hist = [HistoryRecord(tuple(float(v) for v in f), float(w)) for f, w in rows]
    scaled = [HistoryRecord(tuple(np.array(r.features) * k), r.observed_wait) for r in hist]
    a = predict_wait(tuple(float(v) for v in target), hist)
    b = predict_wait(tuple(np.array(target, dtype=float) * k), scaled)
    assert a == pytest.approx(b, rel=1e-6, abs=1e-6)
