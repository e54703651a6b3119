import numpy as np
import pytest
import scipy.optimize

from icinfer._classifiers import _loss_and_grad
from icinfer._classifiers import fit_logreg
from icinfer._classifiers import fit_predict_knn
from icinfer._classifiers import predict
from icinfer._classifiers import softmax
from icinfer._datamodel import one_hot
from icinfer._error import DimensionError
from icinfer._error import FitError
from icinfer._error import ParameterError
from icinfer.types import LinearClassifier


def _blobs(seed, per_class=10, c=2, dim=3, sep=4.0):
    rng = np.random.default_rng(seed)
    y = np.repeat(np.arange(c), per_class)
    means = sep * np.eye(c, dim)
    return means[y] + 0.5 * rng.standard_normal((y.size, dim)), y


def test_logreg_one_shot_each():
    X = np.array([[10.0, 0.0], [-10.0, 0.0]])
    clf = fit_logreg(X, [0, 1], 2)
    assert clf.trained
    assert clf.reg == 0.5
    np.testing.assert_array_equal(predict(clf, X).label, [0, 1])
    np.testing.assert_array_equal(
        predict(clf, [[3.0, 5.0], [-3.0, -5.0]]).label, [0, 1],
    )


def test_logreg_blobs():
    X, y = _blobs(0, c=3)
    clf = fit_logreg(X, y, 3)
    assert np.mean(predict(clf, X).label == y) >= 0.95


def test_logreg_is_deterministic():
    X, y = _blobs(1)
    first = fit_logreg(X, y, 2)
    second = fit_logreg(X.copy(), y.copy(), 2)
    np.testing.assert_array_equal(first.W, second.W)
    np.testing.assert_array_equal(first.b, second.b)


def test_logreg_gradient():
    X, y = _blobs(2, per_class=3, c=3)
    Y = one_hot(y, 3)
    params = np.random.default_rng(2).standard_normal(3 * 3 + 3)
    err = scipy.optimize.check_grad(
        lambda p: _loss_and_grad(p, X, Y, 0.1)[0],
        lambda p: _loss_and_grad(p, X, Y, 0.1)[1],
        params,
    )
    assert err < 1e-5


def test_logreg_missing_class():
    with pytest.raises(FitError) as excinfo:
        fit_logreg([[0.0], [1.0]], [0, 0], 3)
    assert str(excinfo.value) == 'no training instance for class(es) 1, 2'


def test_logreg_label_count():
    with pytest.raises(DimensionError) as excinfo:
        fit_logreg(np.zeros((3, 2)), [0, 1], 2)
    assert str(excinfo.value) == 'expected 3 labels, got 2'


def test_predict_zero_model():
    clf = LinearClassifier(np.zeros((2, 4)), np.zeros(4), 1.0)
    pred = predict(clf, np.ones((3, 2)))
    np.testing.assert_array_equal(pred.label, [0, 0, 0])
    np.testing.assert_allclose(pred.proba, 0.25)


def test_predict_dominant_logit():
    clf = LinearClassifier(np.zeros((1, 3)), np.array([0.0, 50.0, 0.0]), 1.0)
    pred = predict(clf, [[1.0]])
    assert pred.label[0] == 1
    assert pred.proba[0, 1] == pytest.approx(1.0)


def test_predict_rows_sum_to_one():
    rng = np.random.default_rng(3)
    clf = LinearClassifier(
        10 * rng.standard_normal((4, 5)), rng.standard_normal(5), 1.0,
    )
    pred = predict(clf, rng.standard_normal((20, 4)))
    np.testing.assert_allclose(pred.proba.sum(axis=1), 1.0, atol=1e-10)
    np.testing.assert_array_equal(pred.label, np.argmax(pred.proba, axis=1))


def test_predict_untrained():
    clf = LinearClassifier(np.zeros((2, 2)), np.zeros(2), 1.0, trained=False)
    with pytest.raises(FitError) as excinfo:
        predict(clf, np.zeros((1, 2)))
    assert str(excinfo.value) == 'classifier is not trained'


def test_predict_dimension_mismatch():
    clf = LinearClassifier(np.zeros((2, 2)), np.zeros(2), 1.0)
    with pytest.raises(DimensionError) as excinfo:
        predict(clf, np.zeros((3, 5)))
    assert str(excinfo.value) == 'expected 2 features, got shape (3, 5)'


def test_softmax_shift_invariance():
    logits = np.random.default_rng(4).standard_normal((6, 3))
    np.testing.assert_allclose(softmax(logits + 7.0), softmax(logits))


def test_knn_exact_match():
    X, y = _blobs(5)
    pred = fit_predict_knn(X, y, X[[3, 15]], k=1)
    np.testing.assert_array_equal(pred.label, y[[3, 15]])


def test_knn_majority():
    X_train = np.array([[0.0], [0.1], [0.2], [5.0]])
    pred = fit_predict_knn(X_train, [0, 0, 1, 1], [[0.05]], k=3)
    assert pred.label[0] == 0
    np.testing.assert_allclose(pred.proba[0], [2 / 3, 1 / 3])


def test_knn_tie_by_summed_distance():
    X_train = np.array([[1.0], [-2.0]])
    pred = fit_predict_knn(X_train, [1, 0], [[0.0]], k=2)
    assert pred.label[0] == 1


def test_knn_tie_by_class_id():
    X_train = np.array([[1.0], [-1.0]])
    pred = fit_predict_knn(X_train, [1, 0], [[0.0]], k=2)
    assert pred.label[0] == 0


@pytest.mark.parametrize('metric', ('euclidean', 'cosine'))
def test_knn_matches_brute_force(metric):
    X, y = _blobs(6, c=3)
    test = np.random.default_rng(6).standard_normal((15, 3)) * 3
    pred = fit_predict_knn(X, y, test, k=1, metric=metric)
    for point, label in zip(test, pred.label):
        if metric == 'euclidean':
            dist = [np.linalg.norm(point - x) for x in X]
        else:
            dist = [
                1 - point @ x / (np.linalg.norm(point) * np.linalg.norm(x))
                for x in X
            ]
        assert label == y[int(np.argmin(dist))]


def test_knn_empty_test_set():
    X, y = _blobs(7)
    pred = fit_predict_knn(X, y, np.zeros((0, 3)))
    assert pred.label.shape == (0,)
    assert pred.proba.shape == (0, 2)


@pytest.mark.parametrize(
    ('kwargs', 'exc', 'expected'),
    (
        ({'k': 0}, ParameterError, 'k must be in [1, 2], got 0'),
        ({'k': 3}, ParameterError, 'k must be in [1, 2], got 3'),
        (
            {'metric': 'manhattan'}, ParameterError,
            "unknown metric 'manhattan'",
        ),
    ),
)
def test_knn_errors(kwargs, exc, expected):
    with pytest.raises(exc) as excinfo:
        fit_predict_knn([[0.0], [1.0]], [0, 1], [[0.5]], **kwargs)
    assert str(excinfo.value) == expected


def test_knn_empty_training_set():
    with pytest.raises(FitError) as excinfo:
        fit_predict_knn(np.zeros((0, 2)), [], [[0.0, 0.0]])
    assert str(excinfo.value) == 'empty training set'
