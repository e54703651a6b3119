"""Recovery conditions for the elementwise l1 credibility problem.

With U2 an orthonormal basis of the orthogonal complement of col(X), the
vectorized problem reads

    min_gamma  1/2 ||y_u - Utilde gamma||_2^2 + lambda ||gamma||_1

where Utilde = I_c (x) U2^T and y_u = Utilde vec(Y).  Entries of vec(.) are
column major: entry (i, l) of an n x c matrix sits at l * n + i.  Utilde is
never formed; its Gram matrix is I_c (x) X~ with X~ = U2 U2^T.
"""
import csv
import logging
import math

import numpy as np
import scipy.linalg

from icinfer._datamodel import episode_seed
from icinfer._datamodel import l2_normalize
from icinfer._datamodel import one_hot
from icinfer._datamodel import sample_episode
from icinfer._error import DimensionError
from icinfer._error import ParameterError
from icinfer._error import RangeError
from icinfer._icipath import beta_hat
from icinfer._icipath import svd_basis
from icinfer._selftrain import reduce_rows
from icinfer._selftrain import run_episode
from icinfer._selftrain import trainer
from icinfer._selftrain import validate_loop_config
from icinfer.types import ConditionReport
from icinfer.types import FrequencyRow
from icinfer.types import Histogram
from icinfer.types import LoopConfig
from icinfer.types import RecoveryOutcome
from icinfer.types import VectorizedModel

logger = logging.getLogger(__name__)

BUCKETS = ('None', 'C1', 'C1 and C2', 'All')
# restricted Gram matrices with a smaller eigenvalue count as singular
_SINGULAR_EPS = 1e-10
_LEVERAGE_EPS = 1e-12
_ETA_EPS = 1e-12
_MIN_HALF_WIDTH = 1e-6
_LAMBDA_FLOOR = 1e-3


def vectorize(X, Y, rcond=None):
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    n, d = X.shape
    if Y.ndim != 2 or Y.shape[0] != n:
        raise DimensionError(f'expected {n} label rows, got shape {Y.shape}')
    rank = svd_basis(X, rcond)[0].shape[1]
    U_full = scipy.linalg.svd(X, full_matrices=True)[0]
    u2 = U_full[:, rank:]
    y_u = (u2.T @ Y).ravel(order='F')
    return VectorizedModel(n, Y.shape[1], d, rank, u2, y_u)


def utilde_dense(vm):
    """The explicit Utilde; small problems only."""
    return np.kron(np.eye(vm.c), vm.u2.T)


def _unvec(vector, n, c):
    return np.asarray(vector, dtype=np.float64).reshape((n, c), order='F')


def _gram(xtilde, n, rows, cols):
    """Entries of I_c (x) X~ at vec positions rows x cols."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    same = (rows // n)[:, None] == (cols // n)[None, :]
    return np.where(same, xtilde[np.ix_(rows % n, cols % n)], 0.0)


def _instances(entries, n):
    return tuple(sorted({int(j) % n for j in entries}))


def check_conditions(vm, S, gamma_star, lam=None, sigma=None):
    """Evaluate restricted eigenvalue, irrepresentability and large error.

    `lam` defaults to the theorem lambda for `sigma`.  An empty S satisfies
    every condition vacuously.
    """
    n, c = vm.n, vm.c
    size = n * c
    S = np.unique(np.asarray(S, dtype=np.int64))
    if S.size and (S[0] < 0 or S[-1] >= size):
        raise RangeError(f'support index out of range for {size} entries')
    g = np.asarray(gamma_star, dtype=np.float64)
    if g.ndim == 2:
        g = g.ravel(order='F')
    if g.shape != (size,):
        raise DimensionError(f'expected {size} entries, got shape {g.shape}')
    if not np.array_equal(np.flatnonzero(g), S):
        raise ParameterError('gamma_star must be nonzero exactly on S')

    xtilde = vm.u2 @ vm.u2.T
    complement = np.setdiff1d(np.arange(size), S)
    diag = np.tile(np.diag(xtilde), c)
    mu = float(diag[complement].max()) if complement.size else 0.0

    if not S.size:
        return ConditionReport(
            C_min=math.inf, eta=1.0, gamma_min=math.inf, h=0.0, mu=mu,
            verdict_c1=True, verdict_c2=True, verdict_c3=True,
            S=(), O=(),
        )

    gamma_min = float(np.abs(g[S]).min())
    G_SS = _gram(xtilde, n, S, S)
    C_min = float(scipy.linalg.eigvalsh(G_SS)[0])
    if C_min <= _SINGULAR_EPS:
        return ConditionReport(
            C_min=C_min, eta=math.nan, gamma_min=gamma_min, h=math.nan,
            mu=mu, verdict_c1=False, verdict_c2=False, verdict_c3=False,
            S=tuple(int(j) for j in S), O=_instances(S, n),
        )

    if complement.size:
        G_cS = _gram(xtilde, n, complement, S)
        M = scipy.linalg.solve(G_SS, G_cS.T, assume_a='pos').T
        eta = 1.0 - float(np.abs(M).sum(axis=1).max())
        # on the boundary the sign of eta is rounding noise
        if abs(eta) <= _ETA_EPS:
            eta = 0.0
    else:
        eta = 1.0
    if lam is None:
        if sigma is None:
            raise ParameterError('either lam or sigma is required')
        if eta > 0 and mu > 0:
            lam = theorem_lambda(sigma, mu, eta, c, n)
        else:
            # no finite theorem lambda: h is undefined
            lam = math.nan

    # large-error bound: lambda * eta / sqrt(C_min * mu) plus the
    # bias term of the restricted solution
    bias = scipy.linalg.solve(G_SS, np.sign(g[S]), assume_a='pos')
    if mu > 0:
        spread = lam * eta / math.sqrt(C_min * mu)
    else:
        spread = math.inf
    h = spread + lam * float(np.abs(bias).max())
    return ConditionReport(
        C_min=C_min, eta=eta, gamma_min=gamma_min, h=h, mu=mu,
        verdict_c1=True, verdict_c2=eta > 0, verdict_c3=gamma_min > h,
        S=tuple(int(j) for j in S), O=_instances(S, n),
    )


def theorem_lambda(sigma, mu, eta, c, n):
    """2 sigma sqrt(mu) / eta * sqrt(log(c n))"""
    if not 0 < eta <= 1:
        raise RangeError(f'eta must be in (0, 1], got {eta}')
    if mu <= 0:
        raise RangeError(f'mu must be > 0, got {mu}')
    if sigma < 0:
        raise RangeError(f'sigma must be >= 0, got {sigma}')
    return 2 * sigma * math.sqrt(mu) / eta * math.sqrt(math.log(c * n))


def solve_utilde_l1(vm, lam, tol=1e-6, max_iter=10000):
    """Coordinate descent over the entries of gamma, returned as n x c.

    The c columns are independent blocks of Utilde, so one row of gamma is
    updated in a single step.
    """
    if lam < 0:
        raise RangeError(f'lambda must be >= 0, got {lam}')
    if tol <= 0:
        raise ParameterError(f'tol must be > 0, got {tol}')
    n, c, u2 = vm.n, vm.c, vm.u2
    gamma = np.zeros((n, c))
    R = vm.y_u.reshape((u2.shape[1], c), order='F').copy()
    diag = np.sum(u2 ** 2, axis=1)
    for sweep in range(1, max_iter + 1):
        max_change = 0.0
        for i in range(n):
            x_ii = diag[i]
            if x_ii <= _LEVERAGE_EPS:
                continue
            old = gamma[i].copy()
            z = u2[i] @ R + x_ii * old
            new = np.sign(z) * np.maximum(np.abs(z) - lam, 0.0) / x_ii
            delta = new - old
            change = np.abs(delta).max()
            if change > 0:
                gamma[i] = new
                R -= np.outer(u2[i], delta)
                max_change = max(max_change, change)
        if max_change < tol:
            logger.debug('utilde l1 converged after %d sweeps', sweep)
            return gamma
    logger.warning(
        'utilde l1 not converged at lambda=%g after %d sweeps', lam, max_iter,
    )
    return gamma


def _orthogonal(rng, d):
    Q, R = scipy.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def plant(n, d, c, flips, sigma, rng):
    """Features, noisy labels and the planted gamma* of a trial.

    The clean one-hot labels are the first c coordinates of a random
    rotation of X, so they lie in col(X).
    """
    truth = rng.integers(c, size=n)
    Y_true = one_hot(truth, c)
    B = np.hstack((Y_true, rng.standard_normal((n, d - c))))
    X = B @ _orthogonal(rng, d)
    observed = truth.copy()
    if flips:
        flipped = rng.choice(n, size=flips, replace=False)
        shift = rng.integers(1, c, size=flips)
        observed[flipped] = (truth[flipped] + shift) % c
    gamma_star = one_hot(observed, c) - Y_true
    Y = Y_true + gamma_star + sigma * rng.standard_normal((n, c))
    return X, Y, gamma_star


def support_recovery_trial(n, d, c, flips, sigma, seed, tol=1e-6, lam=None):
    if not 0 <= flips < n:
        raise ParameterError(f'flips must be in [0, {n}), got {flips}')
    if flips and c < 2:
        raise ParameterError('flipping labels needs at least 2 classes')
    if not c <= d < n:
        raise ParameterError(f'need c <= d < n, got c={c}, d={d}, n={n}')
    if sigma < 0:
        raise RangeError(f'sigma must be >= 0, got {sigma}')

    rng = np.random.default_rng(seed)
    X, Y, gamma_star = plant(n, d, c, flips, sigma, rng)
    vm = vectorize(X, Y)
    S = np.flatnonzero(gamma_star.ravel(order='F'))

    if lam is not None:
        lam_source = 'given'
    else:
        floor = _LAMBDA_FLOOR * float(np.abs(vm.u2 @ _unvec(
            vm.y_u, vm.u2.shape[1], c,
        )).max(initial=0.0))
        probe = check_conditions(vm, S, gamma_star, lam=0.0)
        theorem = 0.0
        if probe.verdict_c1 and probe.verdict_c2 and probe.mu > 0:
            theorem = theorem_lambda(sigma, probe.mu, probe.eta, c, n)
        if theorem >= floor:
            lam, lam_source = theorem, 'theorem'
        else:
            lam, lam_source = floor, 'floor'
    report = check_conditions(vm, S, gamma_star, lam=lam)

    gamma = solve_utilde_l1(vm, lam, tol)
    flat = gamma.ravel(order='F')
    S_hat = np.flatnonzero(np.abs(flat) > 10 * tol)
    subset = bool(np.isin(S_hat, S).all())
    exact = subset and S_hat.size == S.size
    truth = gamma_star.ravel(order='F')
    sign_consistent = exact and bool(
        np.array_equal(np.sign(flat[S]), np.sign(truth[S])),
    )
    sup_error = float(np.abs(flat[S] - truth[S]).max(initial=0.0))
    O_hat = _instances(S_hat, n)
    report = report._replace(
        S_hat=tuple(int(j) for j in S_hat),
        O_hat=O_hat,
        sign_consistent=sign_consistent,
    )
    return RecoveryOutcome(
        seed=seed,
        lam=float(lam),
        lam_source=lam_source,
        report=report,
        subset=subset,
        exact=exact,
        sign_consistent=sign_consistent,
        sup_error=sup_error,
        within_h=sup_error <= report.h,
        o_subset=set(O_hat) <= set(report.O),
    )


def _bucket(report):
    if not report.verdict_c1:
        return 'None'
    elif not report.verdict_c2:
        return 'C1'
    elif not report.verdict_c3:
        return 'C1 and C2'
    else:
        return 'All'


def estimate_sigma(Z, Y, support, trusted):
    """Residual scale of the support-only least squares fit, measured on
    the support rows and the correctly pseudo-labeled rows.
    """
    beta = np.linalg.lstsq(Z[support], Y[support], rcond=None)[0]
    rows = np.concatenate((support, trusted))
    resid = Y[rows] - Z[rows] @ beta
    return float(np.sqrt(np.mean(resid ** 2)))


def episode_conditions(ep, cfg=LoopConfig()):
    """Condition report of an episode at its first round, with the wrongly
    pseudo-labeled entries (hidden truth) as the planted support.
    """
    c = ep.ways
    Xs, Xu = ep.support_x, ep.unlabeled_x
    if cfg.normalize:
        Xs, Xu = l2_normalize(Xs), l2_normalize(Xu)
    ys = np.asarray(ep.support_y, dtype=np.int64)
    n_s = ys.size
    pseudo = trainer(cfg, c)(Xs, ys)(Xu).label
    Z = reduce_rows(cfg, np.vstack((ep.support_x, ep.unlabeled_x)))
    Y = one_hot(np.concatenate((ys, pseudo)), c)
    truth = one_hot(np.concatenate((ys, ep.unlabeled_truth)), c)
    gamma_star = Y - truth

    vm = vectorize(Z, Y)
    S = np.flatnonzero(gamma_star.ravel(order='F'))
    probe = check_conditions(vm, S, gamma_star, lam=0.0)
    if not (probe.verdict_c1 and probe.verdict_c2 and probe.mu > 0):
        return probe
    trusted = n_s + np.flatnonzero(pseudo == ep.unlabeled_truth)
    sigma = estimate_sigma(Z, Y, np.arange(n_s), trusted)
    return check_conditions(vm, S, gamma_star, sigma=sigma)


def condition_frequency_study(
        store, spec, cfg=LoopConfig(), episodes=100, master_seed=0,
):
    """Episodes per satisfied-condition bucket and how many of them the
    self-taught loop improved over the support-only classifier.
    """
    validate_loop_config(cfg)
    if episodes < 0:
        raise ParameterError(f'episodes must be >= 0, got {episodes}')
    improved = dict.fromkeys(BUCKETS, 0)
    total = dict.fromkeys(BUCKETS, 0)
    for index in range(episodes):
        ep = sample_episode(store, spec, episode_seed(master_seed, index))
        bucket = _bucket(episode_conditions(ep, cfg))
        result = run_episode(ep, cfg)
        total[bucket] += 1
        if result.query_accuracy > result.base_accuracy:
            improved[bucket] += 1
    logger.info('condition study over %d episodes', episodes)
    return tuple(
        FrequencyRow(bucket, improved[bucket], total[bucket])
        for bucket in BUCKETS
    )


def residual_histogram(X, Y, gamma=None, bins=101, rcond=None):
    """Histogram of Y - X beta-hat - gamma over symmetric bins centred on 0."""
    if bins < 1 or bins % 2 == 0:
        raise ParameterError(f'bins must be a positive odd number, got {bins}')
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if gamma is None:
        gamma = np.zeros_like(Y)
    resid = (Y - X @ beta_hat(X, Y, gamma, rcond) - gamma).ravel()
    half = max(float(np.abs(resid).max(initial=0.0)), _MIN_HALF_WIDTH)
    counts, edges = np.histogram(resid, bins=bins, range=(-half, half))
    if resid.size > 1:
        variance = float(resid.var(ddof=1))
    else:
        variance = math.nan
    mean = float(resid.mean()) if resid.size else math.nan
    return Histogram(edges, counts, mean, variance)


def dump_trials(outcomes, stream):
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow((
        'seed', 'lambda', 'C_min', 'eta', 'gamma_min', 'h', 'recovered',
        'sign_consistent',
    ))
    for outcome in outcomes:
        r = outcome.report
        writer.writerow((
            outcome.seed, repr(outcome.lam), repr(r.C_min), repr(r.eta),
            repr(r.gamma_min), repr(r.h), int(outcome.exact),
            int(outcome.sign_consistent),
        ))


def dump_conditions(rows, stream):
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(('bucket', 'improved', 'total', 'ratio'))
    for row in rows:
        writer.writerow((row.bucket, row.improved, row.total, repr(row.ratio)))


def dump_histogram(hist, stream):
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(('low', 'high', 'count'))
    for low, high, count in zip(hist.edges[:-1], hist.edges[1:], hist.counts):
        writer.writerow((repr(float(low)), repr(float(high)), int(count)))
