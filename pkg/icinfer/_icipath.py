"""Linear-regression instance credibility along a regularization path.

With X the (reduced) features and Y the one-hot labels, the coefficients of
the linear model are eliminated through the annihilator X~ = I - H, leaving

    min_gamma  1/2 ||Y~ - X~ gamma||_F^2 + lambda R(gamma)

with R either the sum of row norms (`group_l2`) or the sum of absolute
entries (`l1`).  gamma is profiled out through its proximal map and the
remaining small coefficient block is solved by damped Newton steps, warm
started down a geometric grid.  An instance whose row stays zero down to
a smaller lambda is more credible.
"""
import csv
import logging

import numpy as np
import scipy.linalg

from icinfer._error import ParameterError
from icinfer.types import Annihilator
from icinfer.types import CredibilityRanking
from icinfer.types import GammaPath
from icinfer.types import LambdaGrid
from icinfer.types import PENALTIES

logger = logging.getLogger(__name__)

_ARMIJO = 1e-4
_MAX_HALVINGS = 60
_MIN_DAMPING = 1e-12
_ROUNDING = 1e-13


def default_rcond(shape):
    return 1e-10 * max(shape)


def svd_basis(X, rcond=None):
    """Truncated SVD `(U, s, Vt, rcond)` keeping s > rcond * s_max."""
    X = np.asarray(X, dtype=np.float64)
    if rcond is None:
        rcond = default_rcond(X.shape)
    U, s, Vt = scipy.linalg.svd(X, full_matrices=False)
    cutoff = rcond * s[0] if s.size else 0.0
    rank = int(np.count_nonzero(s > cutoff))
    return U[:, :rank], s[:rank], Vt[:rank], rcond


def annihilator(X, rcond=None):
    basis, _, _, rcond = svd_basis(X, rcond)
    n = basis.shape[0]
    xtilde = np.eye(n) - basis @ basis.T
    xtilde = (xtilde + xtilde.T) / 2
    return Annihilator(xtilde, basis.shape[1], rcond, basis)


def lambda_max(ann, Y):
    """max_i ||X~_{.i}^T Y~||_2 / n"""
    Y = np.asarray(Y, dtype=np.float64)
    Yt = ann.xtilde @ Y
    return float(np.linalg.norm(ann.xtilde.T @ Yt, axis=1).max() / Y.shape[0])


def _check_penalty(penalty):
    if penalty not in PENALTIES:
        raise ParameterError(f'unknown penalty {penalty!r}')


def path_lambda_max(ann, Y, penalty='group_l2'):
    """Smallest lambda at which gamma = 0 solves the 1/2 ||.||^2 problem.

    For the group penalty this is n * lambda_max(ann, Y).  X~ is an
    orthogonal projector, so X~^T Y~ = Y~; the norms are taken exactly as
    `prox` takes them, which keeps gamma(lambda_max) exactly zero.
    """
    _check_penalty(penalty)
    Yt = ann.xtilde @ np.asarray(Y, dtype=np.float64)
    if penalty == 'group_l2':
        return float(_row_norms(Yt).max())
    else:
        return float(np.abs(Yt).max())


def lambda_grid(lam_max, count=100, ratio=1e-3):
    if count < 1:
        raise ParameterError(f'grid count must be >= 1, got {count}')
    if count > 1 and not 0 < ratio < 1:
        raise ParameterError(f'grid ratio must be in (0, 1), got {ratio}')
    if lam_max <= 0:
        # Y~ = 0: every row is zero everywhere, any positive grid will do
        lam_max = 1.0
    values = np.geomspace(lam_max, lam_max * ratio, count)
    values[0] = lam_max
    return LambdaGrid(values, count, ratio)


def gradient(ann, Y, gamma):
    """X~^T (X~ gamma - Y~)"""
    Yt = ann.xtilde @ Y
    return ann.xtilde.T @ (ann.xtilde @ gamma - Yt)


def penalty_value(gamma, penalty):
    if penalty == 'group_l2':
        return float(np.linalg.norm(gamma, axis=1).sum())
    else:
        return float(np.abs(gamma).sum())


def path_objective(ann, Y, gamma, lam, penalty='group_l2'):
    _check_penalty(penalty)
    Y = np.asarray(Y, dtype=np.float64)
    resid = ann.xtilde @ Y - ann.xtilde @ gamma
    smooth = 0.5 * float(np.sum(resid ** 2))
    return smooth + lam * penalty_value(gamma, penalty)


def _kkt(G, gamma, lam, penalty):
    if penalty == 'group_l2':
        norms = np.linalg.norm(gamma, axis=1)
        active = norms > 0
        violation = np.maximum(np.linalg.norm(G, axis=1) - lam, 0.0)
        if active.any():
            unit = gamma[active] / norms[active, None]
            violation[active] = np.linalg.norm(
                G[active] + lam * unit, axis=1,
            )
    else:
        active = gamma != 0
        violation = np.maximum(np.abs(G) - lam, 0.0)
        violation[active] = np.abs(G[active] + lam * np.sign(gamma[active]))
    return float(violation.max()) if violation.size else 0.0


def kkt_violation(ann, Y, gamma, lam, penalty='group_l2'):
    """Largest violation of the subgradient stationarity conditions.

    Active blocks must balance the gradient exactly; zero blocks may carry
    a gradient of dual norm up to lambda.
    """
    _check_penalty(penalty)
    G = gradient(ann, np.asarray(Y, dtype=np.float64), gamma)
    return _kkt(G, gamma, lam, penalty)


def _row_norms(Z):
    return np.sqrt(np.einsum('ij,ij->i', Z, Z))


def prox(Z, lam, penalty):
    """Proximal map of lam R: row or entrywise soft thresholding."""
    if penalty == 'group_l2':
        norms = _row_norms(Z)
        scale = np.zeros_like(norms)
        active = norms > lam
        scale[active] = 1.0 - lam / norms[active]
        return Z * scale[:, None]
    else:
        return np.sign(Z) * np.maximum(np.abs(Z) - lam, 0.0)


class _ProfileSolver:
    """Newton's method on the coefficient block of the path problem.

    Every fit X beta is U b for an r x c block b, and for fixed b the best
    gamma is prox(Y~ + U b).  What remains is the Moreau envelope

        f(b) = sum_i env(Y~_i + U_i b),   grad f = U^T (Z - prox(Z))

    with a 1-Lipschitz gradient.  At a stationary b the gamma it induces
    meets the KKT conditions of the gamma problem; the violation of any
    iterate is bounded by ||grad f||.
    """

    def __init__(self, ann, Y, penalty, tol, max_iter):
        self.U = ann.basis
        self.Yt = ann.xtilde @ Y
        self.penalty = penalty
        self.tol = tol
        self.max_iter = max_iter
        self.b = np.zeros((self.U.shape[1], self.Yt.shape[1]))
        self.gamma = np.zeros_like(self.Yt)

    def _evaluate(self, b, lam):
        Z = self.Yt + self.U @ b
        gamma = prox(Z, lam, self.penalty)
        value = (
            0.5 * float(np.sum((Z - gamma) ** 2)) +
            lam * penalty_value(gamma, self.penalty)
        )
        return Z, gamma, value

    def _direction(self, Z, grad, lam):
        U = self.U
        r, c = grad.shape
        damping = min(1.0, max(float(np.linalg.norm(grad)), _MIN_DAMPING))
        if self.penalty == 'group_l2':
            # envelope curvature: I on zeroed rows, lam / |z| (I - z z^T)
            # across active rows
            norms = _row_norms(Z)
            active = norms > lam
            curv = np.broadcast_to(np.eye(c), (Z.shape[0], c, c)).copy()
            if active.any():
                unit = Z[active] / norms[active, None]
                curv[active] = (lam / norms[active])[:, None, None] * (
                    np.eye(c) - unit[:, :, None] * unit[:, None, :]
                )
            H = np.einsum('ia,ijk,ib->ajbk', U, curv, U).reshape(r * c, r * c)
            H[np.diag_indices_from(H)] += damping
            step = scipy.linalg.solve(H, -grad.ravel(), assume_a='pos')
            return step.reshape(r, c)
        else:
            # separable over classes; curvature 1 on zeroed entries only
            curv = (np.abs(Z) <= lam).astype(np.float64)
            H = np.einsum('ia,ij,ib->jab', U, curv, U)
            H += damping * np.eye(r)
            step = np.linalg.solve(H, -grad.T[:, :, None])[:, :, 0]
            return step.T

    def gradient(self):
        """X~^T (X~ gamma - Y~) of the current gamma."""
        return self.gamma - self.U @ (self.U.T @ self.gamma) - self.Yt

    def residual_norm(self):
        resid = self.Yt - self.gamma + self.U @ (self.U.T @ self.gamma)
        return float(np.linalg.norm(resid))

    def solve(self, lam):
        """Warm-started solve at one lambda; returns (converged, steps).

        Converged means the KKT certificate holds for the returned gamma.
        """
        slack = 10 * self.tol * max(1.0, lam)
        Z, gamma, value = self._evaluate(self.b, lam)
        steps = 0
        while True:
            self.gamma = gamma
            if _kkt(self.gradient(), gamma, lam, self.penalty) <= slack:
                return True, steps
            grad = self.U.T @ (Z - gamma)
            if steps >= self.max_iter or not grad.size:
                return False, steps
            direction = self._direction(Z, grad, lam)
            slope = float(np.sum(grad * direction))
            # objective values are only known to rounding near the optimum
            noise = _ROUNDING * max(1.0, abs(value))
            t = 1.0
            for _ in range(_MAX_HALVINGS):
                b = self.b + t * direction
                Z_new, gamma_new, value_new = self._evaluate(b, lam)
                if value_new <= value + _ARMIJO * t * slope + noise:
                    break
                t /= 2
            else:
                logger.debug('line search stalled at lambda=%g', lam)
                return False, steps
            self.b, Z, gamma, value = b, Z_new, gamma_new, value_new
            steps += 1


def solve_path(
        ann, Y, grid, penalty='group_l2', tol=1e-6, max_iter=10000,
):
    """gamma-hat over every lambda of a descending grid."""
    _check_penalty(penalty)
    if tol <= 0:
        raise ParameterError(f'tol must be > 0, got {tol}')
    values = np.asarray(grid.values, dtype=np.float64)
    if np.any(np.diff(values) >= 0):
        raise ParameterError('lambda grid must be strictly descending')

    Y = np.asarray(Y, dtype=np.float64)
    solver = _ProfileSolver(ann, Y, penalty, tol, max_iter)
    n, c = Y.shape
    gammas = np.empty((values.size, n, c))
    residuals = np.empty(values.size)
    converged = np.empty(values.size, dtype=bool)
    n_iter = np.empty(values.size, dtype=np.int64)
    for k, lam in enumerate(values):
        converged[k], n_iter[k] = solver.solve(lam)
        if not converged[k]:
            logger.debug(
                'no convergence at lambda=%g after %d steps', lam, n_iter[k],
            )
        gammas[k] = solver.gamma
        residuals[k] = solver.residual_norm()

    path = GammaPath(
        lambdas=values,
        gammas=gammas,
        penalty=penalty,
        vanish_lambda=np.empty(0),
        residual_norms=residuals,
        converged=converged,
        n_iter=n_iter,
        tol=tol,
    )
    return path._replace(vanish_lambda=vanish_lambda(path))


def fit_path(
        X, Y, penalty='group_l2', grid_count=100, grid_ratio=1e-3, tol=1e-6,
        max_iter=10000, rcond=None,
):
    """annihilator -> grid -> path, the whole linear pipeline."""
    ann = annihilator(X, rcond)
    top = path_lambda_max(ann, Y, penalty)
    grid = lambda_grid(top, grid_count, grid_ratio)
    return solve_path(ann, Y, grid, penalty, tol, max_iter)


def vanish_lambda(path):
    """Smallest grid lambda at and above which each row stays zero."""
    zero = np.linalg.norm(path.gammas, axis=2) < 10 * path.tol
    # number of leading grid points (from lambda_max down) with a zero row
    leading = np.cumprod(zero, axis=0).sum(axis=0)
    return path.lambdas[np.maximum(leading - 1, 0)]


def residual_row_norms(path):
    """||gamma_i|| at the smallest grid lambda."""
    return np.linalg.norm(path.gammas[-1], axis=1)


def rank_instances(path, confidences):
    """Most credible first: ascending vanish-lambda, then smaller residual
    row norm, then higher confidence, then lower index.
    """
    scores = np.asarray(path.vanish_lambda, dtype=np.float64)
    confidences = np.asarray(confidences, dtype=np.float64)
    residual = residual_row_norms(path)
    index = np.arange(scores.size)
    order = np.lexsort((index, -confidences, residual, scores))
    tiebreak = np.column_stack((residual, confidences, index))
    return CredibilityRanking(order, scores, tiebreak)


def beta_hat(X, Y, gamma, rcond=None):
    """(X^T X)^+ X^T (Y - gamma), through the truncated SVD of X."""
    U, s, Vt, _ = svd_basis(X, rcond)
    target = np.asarray(Y, dtype=np.float64) - gamma
    return Vt.T @ ((U.T @ target) / s[:, None])


def dump_path(path, stream):
    """`variant,lambda,instance,class,gamma`; lambda descends within each
    (instance, class) block.
    """
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(('variant', 'lambda', 'instance', 'class', 'gamma'))
    _, n, c = path.gammas.shape
    for i in range(n):
        for j in range(c):
            for lam, value in zip(path.lambdas, path.gammas[:, i, j]):
                writer.writerow(
                    (path.variant, repr(float(lam)), i, j, repr(float(value))),
                )


def dump_vanish(path, stream, selected=None, correct=None):
    """`instance,vanish_lambda,selected,correct` companion of dump_path.

    `selected` and `correct` map instance index to a bool; missing entries
    are written as empty cells.
    """
    selected = selected or {}
    correct = correct or {}

    def flag(mapping, i):
        if i not in mapping:
            return ''
        return int(bool(mapping[i]))

    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(('instance', 'vanish_lambda', 'selected', 'correct'))
    for i, value in enumerate(path.vanish_lambda):
        writer.writerow(
            (i, repr(float(value)), flag(selected, i), flag(correct, i)),
        )
