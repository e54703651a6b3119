import numpy as np
import scipy.optimize
from scipy.spatial.distance import cdist

from icinfer._datamodel import one_hot
from icinfer._error import DimensionError
from icinfer._error import FitError
from icinfer._error import ParameterError
from icinfer.types import LinearClassifier
from icinfer.types import METRICS
from icinfer.types import Prediction

GTOL = 1e-6


def softmax(logits):
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def _prediction(proba):
    # argmax takes the first maximum: ties go to the lowest class id
    return Prediction(np.argmax(proba, axis=1), proba)


def _loss_and_grad(params, X, Y, reg):
    m, dim = X.shape
    c = Y.shape[1]
    W = params[:dim * c].reshape(dim, c)
    b = params[dim * c:]
    logits = X @ W + b
    top = logits.max(axis=1, keepdims=True)
    lse = top[:, 0] + np.log(np.exp(logits - top).sum(axis=1))
    loss = np.mean(lse - np.sum(Y * logits, axis=1))
    loss += 0.5 * reg * np.sum(W * W)
    G = (softmax(logits) - Y) / m
    grad_W = X.T @ G + reg * W
    return loss, np.concatenate((grad_W.ravel(), G.sum(axis=0)))


def fit_logreg(X, y, c, reg=None, max_iter=1000):
    """l2-penalized multinomial logistic regression with an unpenalized
    intercept, fitted by L-BFGS from zero.

    `reg` defaults to 1 / m.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    m, dim = X.shape
    if y.shape != (m,):
        raise DimensionError(f'expected {m} labels, got {y.shape[0]}')
    missing = sorted(set(range(c)) - set(y.tolist()))
    if missing:
        raise FitError(
            'no training instance for class(es) {}'.format(
                ', '.join(str(cls) for cls in missing),
            ),
        )
    if reg is None:
        reg = 1.0 / m
    Y = one_hot(y, c)
    result = scipy.optimize.minimize(
        _loss_and_grad,
        np.zeros(dim * c + c),
        args=(X, Y, reg),
        jac=True,
        method='L-BFGS-B',
        options={'gtol': GTOL, 'ftol': 0.0, 'maxiter': max_iter},
    )
    W = result.x[:dim * c].reshape(dim, c)
    b = result.x[dim * c:]
    return LinearClassifier(W, b, float(reg), trained=True)


def predict(clf, X):
    if not clf.trained:
        raise FitError('classifier is not trained')
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != clf.W.shape[0]:
        raise DimensionError(
            f'expected {clf.W.shape[0]} features, got shape {X.shape}',
        )
    return _prediction(softmax(X @ clf.W + clf.b))


def fit_predict_knn(X_train, y_train, X_test, k=1, metric='euclidean', c=None):
    """Majority vote of the k nearest training points; ties go to the class
    with the smaller summed distance, then to the lower class id.
    """
    if metric not in METRICS:
        raise ParameterError(f'unknown metric {metric!r}')
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    X_test = np.asarray(X_test, dtype=np.float64)
    if X_train.shape[0] == 0:
        raise FitError('empty training set')
    if not 1 <= k <= X_train.shape[0]:
        raise ParameterError(
            f'k must be in [1, {X_train.shape[0]}], got {k}',
        )
    if c is None:
        c = int(y_train.max()) + 1

    proba = np.zeros((X_test.shape[0], c))
    if X_test.shape[0] == 0:
        return _prediction(proba)
    dist = cdist(X_test, X_train, metric=metric)
    nearest = np.argsort(dist, axis=1, kind='stable')[:, :k]
    labels = np.empty(X_test.shape[0], dtype=np.int64)
    for i, idx in enumerate(nearest):
        votes = np.bincount(y_train[idx], minlength=c)
        summed = np.bincount(y_train[idx], weights=dist[i, idx], minlength=c)
        tied = np.flatnonzero(votes == votes.max())
        labels[i] = tied[np.lexsort((tied, summed[tied]))[0]]
        proba[i] = votes / k
    return Prediction(labels, proba)
