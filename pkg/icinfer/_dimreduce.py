import logging

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from icinfer._error import ParameterError
from icinfer.types import REDUCERS
from icinfer.types import ReducedFeatures

logger = logging.getLogger(__name__)


def _fix_signs(vectors):
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1
    return vectors * signs


def nearest_neighbors(X, k):
    """k nearest neighbors of every row, self excluded, ties by index."""
    dist = cdist(X, X)
    np.fill_diagonal(dist, np.inf)
    return np.argsort(dist, axis=1, kind='stable')[:, :k]


def lle_weights(X, k, reg=1e-3):
    """Reconstruction weights of each point from its k neighbors.

    Returns the dense n x n weight matrix; every row sums to one.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if k < 1 or k >= n:
        raise ParameterError(
            f'k must be in [1, {n - 1}] for {n} points, got {k}',
        )

    neighbors = nearest_neighbors(X, k)
    W = np.zeros((n, n))
    ones = np.ones(k)
    for i in range(n):
        Z = X[neighbors[i]] - X[i]
        G = Z @ Z.T
        trace = np.trace(G)
        # coincident neighbors give trace 0, fall back to the bare reg
        G.flat[::k + 1] += reg * trace / k if trace > 0 else reg
        w = scipy.linalg.solve(G, ones, assume_a='pos')
        W[i, neighbors[i]] = w / w.sum()
    return W


def lle_fit_transform(X, d, k=5, reg=1e-3):
    X = np.asarray(X, dtype=np.float64)
    n, dim = X.shape
    if d < 1 or d > min(dim, n - 1):
        raise ParameterError(
            f'd must be in [1, {min(dim, n - 1)}] for {n}x{dim} input, '
            f'got {d}',
        )
    W = lle_weights(X, k, reg)
    IW = np.eye(n) - W
    M = IW.T @ IW
    # bottom eigenvector is the constant one, skipped
    _, vectors = scipy.linalg.eigh(M, subset_by_index=[1, d])
    Z = _fix_signs(vectors) * np.sqrt(n)
    return ReducedFeatures(Z, 'lle', d)


def pca_fit_transform(X, d):
    X = np.asarray(X, dtype=np.float64)
    n, dim = X.shape
    if d < 1 or d > min(n, dim):
        raise ParameterError(
            f'd must be in [1, {min(n, dim)}] for {n}x{dim} input, got {d}',
        )
    Xc = X - X.mean(axis=0)
    _, _, Vt = scipy.linalg.svd(Xc, full_matrices=False)
    components = _fix_signs(Vt[:d].T)
    return ReducedFeatures(Xc @ components, 'pca', d)


def reduce_features(X, method='lle', d=5, k=5, reg=1e-3):
    """Dispatch to a reducer, clipping `d` to what the episode admits."""
    if method not in REDUCERS:
        raise ParameterError(f'unknown reduction {method!r}')
    X = np.asarray(X, dtype=np.float64)
    n, dim = X.shape
    if method == 'none':
        return ReducedFeatures(X, 'none', dim, requested_d=d)
    elif method == 'lle':
        limit = min(dim, n - 1)
    else:
        limit = min(dim, n)
    used = max(1, min(d, limit))
    if used != d:
        logger.debug(
            '%s: clipping d=%d to %d for %dx%d', method, d, used, n, dim,
        )
    if method == 'lle':
        reduced = lle_fit_transform(X, used, k=min(k, n - 1), reg=reg)
    else:
        reduced = pca_fit_transform(X, used)
    return reduced._replace(requested_d=d)
