"""Logistic-regression instance credibility.

The design is augmented with an identity block, Xbar = (X | I), so the
incidental parameters become ordinary coefficients of a multinomial model
penalized by lambda2 while beta is penalized by lambda1 = alpha * lambda2.
Without the beta penalty the problem is ill-posed: adding a constant to one
row of beta across all classes leaves every probability unchanged.
"""
import logging

import numpy as np

from icinfer._error import ParameterError
from icinfer._icipath import lambda_grid
from icinfer._icipath import penalty_value
from icinfer._icipath import vanish_lambda
from icinfer.types import AugmentedDesign
from icinfer.types import GammaPath
from icinfer.types import LogitPathConfig
from icinfer.types import PENALTIES

logger = logging.getLogger(__name__)

WEIGHT_FLOOR = 1e-5
MAX_HALVINGS = 20
DIVERGENCE_SLACK = 1e-8
_BISECTION_STEPS = 40
_BISECTION_RTOL = 1e-3


def augment_design(X):
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    return AugmentedDesign(np.hstack((X, np.eye(n))), d, n)


def _log_softmax_parts(eta):
    top = eta.max(axis=1, keepdims=True)
    shifted = np.exp(eta - top)
    total = shifted.sum(axis=1, keepdims=True)
    lse = top[:, 0] + np.log(total[:, 0])
    return shifted / total, lse


def probabilities(X, beta, gamma):
    proba, _ = _log_softmax_parts(X @ beta + gamma)
    return proba


def data_term(X, Y, beta, gamma):
    eta = X @ beta + gamma
    _, lse = _log_softmax_parts(eta)
    return -float(np.mean(np.sum(Y * eta, axis=1) - lse))


def nll_objective(
        X, Y, beta, gamma, lambda1, lambda2, penalty='group_l2',
):
    """Penalized multinomial negative log-likelihood, averaged over rows."""
    if penalty not in PENALTIES:
        raise ParameterError(f'unknown penalty {penalty!r}')
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    return (
        data_term(X, Y, beta, gamma) +
        lambda1 * penalty_value(beta, penalty) +
        lambda2 * penalty_value(gamma, penalty)
    )


def smooth_gradient(X, Y, beta, gamma):
    """Gradient of the data term: (X^T G, G) with G = (P - Y) / n."""
    X = np.asarray(X, dtype=np.float64)
    G = (probabilities(X, beta, gamma) - Y) / X.shape[0]
    return X.T @ G, G


def gradient_check(X, Y, beta, gamma, step=1e-5):
    """Max relative error of the analytic data-term gradient against
    central differences.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    beta = np.array(beta, dtype=np.float64)
    gamma = np.array(gamma, dtype=np.float64)
    analytic = smooth_gradient(X, Y, beta, gamma)

    worst = 0.0
    for param, grad in zip((beta, gamma), analytic):
        for idx in np.ndindex(param.shape):
            orig = param[idx]
            param[idx] = orig + step
            up = data_term(X, Y, beta, gamma)
            param[idx] = orig - step
            down = data_term(X, Y, beta, gamma)
            param[idx] = orig
            numeric = (up - down) / (2 * step)
            scale = max(abs(grad[idx]) + abs(numeric), 1e-3)
            worst = max(worst, abs(grad[idx] - numeric) / scale)
    return worst


def _soft(z, lam):
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def _group_shrink(z, lam):
    """Row-wise block soft threshold; `lam` broadcasts per row."""
    norms = np.linalg.norm(np.atleast_2d(z), axis=1)
    lam = np.broadcast_to(lam, norms.shape)
    scale = np.zeros_like(norms)
    keep = norms > lam
    scale[keep] = 1.0 - lam[keep] / norms[keep]
    return (np.atleast_2d(z) * scale[:, None]).reshape(z.shape)


class _LogitSolver:
    """Partial Newton with penalized weighted least squares inside.

    Each outer step takes, per class, the quadratic approximation of the
    multinomial log-likelihood in that class's linear predictor (weights
    p(1 - p) floored at WEIGHT_FLOOR), minimizes it plus the penalty by
    coordinate descent over the rows of beta and, all at once, the rows of
    gamma (the identity block makes them independent of each other), then
    backtracks by step halving until the true objective does not increase.
    """

    def __init__(self, X, Y, penalty, tol, max_outer, max_inner):
        self.X = np.asarray(X, dtype=np.float64)
        self.Y = np.asarray(Y, dtype=np.float64)
        self.penalty = penalty
        self.tol = tol
        self.max_outer = max_outer
        self.max_inner = max_inner
        n, d = self.X.shape
        c = self.Y.shape[1]
        self.beta = np.zeros((d, c))
        self.gamma = np.zeros((n, c))
        self.col_sq = self.X ** 2

    def objective(self, beta, gamma, lam1, lam2):
        return nll_objective(
            self.X, self.Y, beta, gamma, lam1, lam2, self.penalty,
        )

    def _inner(self, R0, W, lam1, lam2, fit_gamma):
        X, n = self.X, self.X.shape[0]
        group = self.penalty == 'group_l2'
        beta = self.beta.copy()
        gamma = self.gamma.copy()
        deta = np.zeros_like(gamma)
        for _ in range(self.max_inner):
            max_change = 0.0
            for j in range(X.shape[1]):
                x = X[:, j]
                curv = self.col_sq[:, j] @ W / n
                if not curv.max() > 0:
                    continue
                grad = x @ (R0 + W * deta) / n
                cur = beta[j]
                if group:
                    step = curv.max()
                    new = _group_shrink(cur - grad / step, lam1 / step)
                else:
                    new = np.zeros_like(cur)
                    ok = curv > 0
                    new[ok] = _soft(
                        curv[ok] * cur[ok] - grad[ok], lam1,
                    ) / curv[ok]
                delta = new - cur
                if np.any(delta):
                    beta[j] = new
                    deta += np.outer(x, delta)
                    max_change = max(max_change, np.abs(delta).max())
            if fit_gamma:
                curv = W / n
                grad = (R0 + W * deta) / n
                if group:
                    step = curv.max(axis=1)
                    new = _group_shrink(
                        gamma - grad / step[:, None], lam2 / step,
                    )
                else:
                    new = _soft(curv * gamma - grad, lam2) / curv
                delta = new - gamma
                if np.any(delta):
                    gamma = new
                    deta += delta
                    max_change = max(max_change, np.abs(delta).max())
            if max_change < self.tol:
                break
        return beta, gamma

    def fit(self, lam1, lam2, fit_gamma=True):
        """Warm-started solve; returns (converged, diverged, outer steps)."""
        if not fit_gamma:
            self.gamma = np.zeros_like(self.gamma)
        current = self.objective(self.beta, self.gamma, lam1, lam2)
        for outer in range(1, self.max_outer + 1):
            proba = probabilities(self.X, self.beta, self.gamma)
            W = np.maximum(proba * (1.0 - proba), WEIGHT_FLOOR)
            beta, gamma = self._inner(proba - self.Y, W, lam1, lam2, fit_gamma)
            dbeta = beta - self.beta
            dgamma = gamma - self.gamma

            t = 1.0
            for _ in range(MAX_HALVINGS + 1):
                cand_beta = self.beta + t * dbeta
                cand_gamma = self.gamma + t * dgamma
                value = self.objective(cand_beta, cand_gamma, lam1, lam2)
                if value <= current:
                    break
                t /= 2
            else:
                if value - current > DIVERGENCE_SLACK:
                    return False, True, outer
                # stalled within rounding of the optimum
                return True, False, outer

            change = t * max(
                np.abs(dbeta).max(initial=0.0),
                np.abs(dgamma).max(initial=0.0),
            )
            self.beta, self.gamma = cand_beta, cand_gamma
            decrease = current - value
            current = value
            if change < self.tol or decrease < self.tol * self.tol:
                return True, False, outer
        return False, False, self.max_outer


def _dual_norm(G, penalty):
    if penalty == 'group_l2':
        return float(np.linalg.norm(G, axis=1).max())
    else:
        return float(np.abs(G).max())


def logit_lambda_max(X, Y, alpha=0.5, penalty='group_l2', cfg=None):
    """Twice the smallest lambda2 at which gamma = 0 is optimal given the
    beta-only solution at lambda1 = alpha * lambda2, found by bisection.
    """
    if alpha <= 0:
        raise ParameterError(f'alpha must be > 0, got {alpha}')
    cfg = cfg or LogitPathConfig(alpha=alpha)
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    n, c = Y.shape
    G0 = (np.full_like(Y, 1.0 / c) - Y) / n
    # beta = 0 is the beta-only optimum once lambda1 covers X^T G0
    hi = max(_dual_norm(G0, penalty), _dual_norm(X.T @ G0, penalty) / alpha)
    if hi <= 0:
        return 0.0

    solver = _LogitSolver(
        X, Y, penalty, cfg.tol, cfg.max_outer, cfg.max_inner,
    )

    def gamma_is_zero(lam2):
        solver.fit(alpha * lam2, lam2, fit_gamma=False)
        _, G = smooth_gradient(X, Y, solver.beta, solver.gamma)
        return _dual_norm(G, penalty) <= lam2

    lo = 0.0
    for _ in range(_BISECTION_STEPS):
        if hi - lo <= _BISECTION_RTOL * hi:
            break
        mid = (lo + hi) / 2
        if gamma_is_zero(mid):
            hi = mid
        else:
            lo = mid
    return 2.0 * hi


def fit_logit(
        X, Y, lambda1, lambda2, penalty='group_l2', tol=1e-6, max_outer=100,
        max_inner=1000,
):
    """Single (lambda1, lambda2) solve from zero; returns (beta, gamma,
    converged).
    """
    if penalty not in PENALTIES:
        raise ParameterError(f'unknown penalty {penalty!r}')
    solver = _LogitSolver(X, Y, penalty, tol, max_outer, max_inner)
    converged, diverged, _ = solver.fit(lambda1, lambda2)
    return solver.beta, solver.gamma, converged and not diverged


def solve_logit_path(X, Y, cfg=LogitPathConfig(), penalty='group_l2'):
    if cfg.alpha <= 0:
        raise ParameterError(f'alpha must be > 0, got {cfg.alpha}')
    if penalty not in PENALTIES:
        raise ParameterError(f'unknown penalty {penalty!r}')
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    grid = cfg.grid
    if grid is None:
        top = logit_lambda_max(X, Y, cfg.alpha, penalty, cfg)
        grid = lambda_grid(top, cfg.grid_count, cfg.grid_ratio)
    values = np.asarray(grid.values, dtype=np.float64)
    if np.any(np.diff(values) >= 0):
        raise ParameterError('lambda grid must be strictly descending')

    solver = _LogitSolver(
        X, Y, penalty, cfg.tol, cfg.max_outer, cfg.max_inner,
    )
    n, c = Y.shape
    gammas = np.empty((values.size, n, c))
    betas = np.empty((values.size, X.shape[1], c))
    residuals = np.empty(values.size)
    converged = np.empty(values.size, dtype=bool)
    n_iter = np.empty(values.size, dtype=np.int64)
    for k, lam2 in enumerate(values):
        ok, diverged, n_iter[k] = solver.fit(cfg.alpha * lam2, lam2)
        converged[k] = ok and not diverged
        if diverged:
            logger.debug('objective increase at lambda2=%g', lam2)
        elif not ok:
            logger.debug('no convergence at lambda2=%g', lam2)
        gammas[k] = solver.gamma
        betas[k] = solver.beta
        proba = probabilities(X, solver.beta, solver.gamma)
        residuals[k] = np.linalg.norm(Y - proba)

    path = GammaPath(
        lambdas=values,
        gammas=gammas,
        penalty=penalty,
        vanish_lambda=np.empty(0),
        residual_norms=residuals,
        converged=converged,
        n_iter=n_iter,
        tol=cfg.tol,
        variant='logit',
        betas=betas,
    )
    return path._replace(vanish_lambda=vanish_lambda(path))
