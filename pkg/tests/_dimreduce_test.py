import numpy as np
import pytest
import scipy.linalg

from icinfer._dimreduce import lle_fit_transform
from icinfer._dimreduce import lle_weights
from icinfer._dimreduce import nearest_neighbors
from icinfer._dimreduce import pca_fit_transform
from icinfer._dimreduce import reduce_features
from icinfer._error import ParameterError


def test_nearest_neighbors_excludes_self_and_breaks_ties_by_index():
    X = np.array([[0.0], [1.0], [-1.0], [3.0]])
    np.testing.assert_array_equal(nearest_neighbors(X, 2)[0], [1, 2])


@pytest.mark.parametrize('seed', range(5))
def test_lle_weight_rows_sum_to_one(seed):
    X = np.random.default_rng(seed).standard_normal((15, 6))
    W = lle_weights(X, 4)
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-8)
    assert np.all(np.count_nonzero(W, axis=1) <= 4)
    np.testing.assert_array_equal(np.diag(W), 0.0)


def test_lle_weights_coincident_points():
    X = np.zeros((5, 3))
    W = lle_weights(X, 2)
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-8)
    assert np.isfinite(W).all()


def test_lle_weights_k_too_large():
    with pytest.raises(ParameterError) as excinfo:
        lle_weights(np.zeros((4, 2)), 4)
    assert str(excinfo.value) == 'k must be in [1, 3] for 4 points, got 4'


def test_lle_line_is_monotone():
    t = np.arange(12, dtype=np.float64)
    X = np.outer(t, [1.0, 2.0, -0.5]) + [3.0, 0.0, 1.0]
    Z = lle_fit_transform(X, 1, k=2).Z[:, 0]
    steps = np.diff(Z)
    assert np.all(steps > 0) or np.all(steps < 0)


def test_lle_cost_matrix_has_constant_null_vector():
    X = np.random.default_rng(3).standard_normal((6, 4))
    W = lle_weights(X, 3)
    M = (np.eye(6) - W).T @ (np.eye(6) - W)
    np.testing.assert_allclose(M, M.T, atol=1e-12)
    values, vectors = scipy.linalg.eigh(M)
    assert abs(values[0]) < 1e-10
    np.testing.assert_allclose(
        np.abs(vectors[:, 0]), 1 / np.sqrt(6), atol=1e-6,
    )
    Z = lle_fit_transform(X, 2, k=3).Z
    assert Z.shape == (6, 2)
    # embedding columns are orthogonal to the constant vector
    np.testing.assert_allclose(Z.sum(axis=0), 0.0, atol=1e-6)


def test_lle_translation_invariant():
    X = np.random.default_rng(4).standard_normal((20, 5))
    first = lle_fit_transform(X, 3).Z
    second = lle_fit_transform(X + 10.0, 3).Z
    np.testing.assert_allclose(first, second, atol=1e-6)


def test_lle_d_out_of_range():
    with pytest.raises(ParameterError) as excinfo:
        lle_fit_transform(np.zeros((4, 5)), 4, k=2)
    assert str(excinfo.value) == 'd must be in [1, 3] for 4x5 input, got 4'


def test_pca_exact_subspace():
    rng = np.random.default_rng(0)
    basis = rng.standard_normal((2, 6))
    X = rng.standard_normal((10, 2)) @ basis + rng.standard_normal(6)
    Z = pca_fit_transform(X, 2).Z
    Xc = X - X.mean(axis=0)
    # project back with the least squares map
    coef = np.linalg.lstsq(Z, Xc, rcond=None)[0]
    np.testing.assert_allclose(Z @ coef, Xc, atol=1e-8)


def test_pca_column_variances():
    X = np.random.default_rng(1).standard_normal((20, 8))
    Z = pca_fit_transform(X, 3).Z
    s = np.linalg.svd(X - X.mean(axis=0), compute_uv=False)
    np.testing.assert_allclose(Z.var(axis=0), s[:3] ** 2 / 20, atol=1e-8)


def test_pca_duplicate_rows_and_signs():
    X = np.random.default_rng(2).standard_normal((8, 4))
    X = np.vstack((X, X[:1]))
    Z = pca_fit_transform(X, 2).Z
    np.testing.assert_allclose(Z[0], Z[-1])


def test_reduce_features_clips_d():
    X = np.random.default_rng(5).standard_normal((4, 10))
    reduced = reduce_features(X, 'lle', d=5, k=5)
    assert reduced.d == 3
    assert reduced.requested_d == 5
    assert reduced.Z.shape == (4, 3)
    assert reduce_features(X, 'pca', d=5).d == 4


def test_reduce_features_none():
    X = np.ones((3, 2))
    reduced = reduce_features(X, 'none', d=5)
    np.testing.assert_array_equal(reduced.Z, X)
    assert reduced.method == 'none'


def test_reduce_features_unknown():
    with pytest.raises(ParameterError) as excinfo:
        reduce_features(np.ones((3, 2)), 'isomap')
    assert str(excinfo.value) == "unknown reduction 'isomap'"
