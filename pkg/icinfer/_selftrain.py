"""The self-taught loop: train, pseudo-label, rank, select, retrain.

Rows handed to the ranking are the support rows followed by the whole
unlabeled pool.  Only unlabeled rows that were not selected before are ever
eligible; selected rows keep the pseudo-label they were selected with and
stay in the regression with it.
"""
import concurrent.futures
import logging
import math
from typing import NamedTuple
from typing import Optional
from typing import Tuple

import numpy as np
from scipy.spatial.distance import cdist

from icinfer._classifiers import fit_logreg
from icinfer._classifiers import fit_predict_knn
from icinfer._classifiers import predict
from icinfer._datamodel import episode_seed
from icinfer._datamodel import l2_normalize
from icinfer._datamodel import one_hot
from icinfer._datamodel import sample_episode
from icinfer._dimreduce import reduce_features
from icinfer._error import ParameterError
from icinfer._icilogit import solve_logit_path
from icinfer._icipath import fit_path
from icinfer._icipath import rank_instances
from icinfer._icipath import residual_row_norms
from icinfer.types import AccuracyReport
from icinfer.types import CLASSIFIERS
from icinfer.types import CredibilityRanking
from icinfer.types import EpisodeResult
from icinfer.types import GammaPath
from icinfer.types import IterationRecord
from icinfer.types import LogitPathConfig
from icinfer.types import LoopConfig
from icinfer.types import METRICS
from icinfer.types import PENALTIES
from icinfer.types import REDUCERS
from icinfer.types import SELECTIONS
from icinfer.types import VARIANTS

logger = logging.getLogger(__name__)

# max_iter caps both step counts of the logistic solver
_LOGIT_LIMITS = LogitPathConfig()

BASELINES = ('ra', 'nn', 'co', 'cn')
Z_95 = 1.96


class RankState(NamedTuple):
    """What a ranking strategy may look at: no hidden labels in here."""
    reduced: np.ndarray
    labels: np.ndarray
    confidences: np.ndarray
    labeled: np.ndarray
    seed: object
    path: Optional[GammaPath] = None


def validate_loop_config(cfg):
    choices = (
        ('variant', VARIANTS), ('selection', SELECTIONS),
        ('penalty', PENALTIES), ('reduce', REDUCERS),
        ('classifier', CLASSIFIERS), ('knn_metric', METRICS),
    )
    for field, allowed in choices:
        if getattr(cfg, field) not in allowed:
            raise ParameterError(
                f'{field} must be one of {", ".join(allowed)}, '
                f'got {getattr(cfg, field)!r}',
            )
    if cfg.per_class_per_iter < 1:
        raise ParameterError('per_class_per_iter must be >= 1')
    if cfg.total_cap is not None and cfg.total_cap < 0:
        raise ParameterError('total_cap must be >= 0')
    if cfg.max_rounds is not None and cfg.max_rounds < 0:
        raise ParameterError('max_rounds must be >= 0')
    if cfg.variant == 'icic' and cfg.alpha <= 0:
        raise ParameterError('alpha must be > 0 for icic')


def _ranked(scores):
    """ascending scores, ties by index"""
    return np.lexsort((np.arange(scores.size), scores))


def baseline_rank(strategy, state):
    """RA shuffles; NN, CO and CN sort by a single score."""
    n = state.labels.size
    index = np.arange(n)
    if strategy == 'ra':
        rng = np.random.default_rng(state.seed)
        order = rng.permutation(n)
        scores = np.empty(n)
        scores[order] = np.arange(n, dtype=np.float64)
    elif strategy == 'nn':
        anchors = np.flatnonzero(state.labeled)
        dist = cdist(state.reduced, state.reduced[anchors])
        same = state.labels[:, None] == state.labels[anchors][None, :]
        scores = np.where(same, dist, np.inf).min(axis=1, initial=np.inf)
        order = _ranked(scores)
    elif strategy == 'co':
        scores = np.asarray(state.confidences, dtype=np.float64)
        order = _ranked(-scores)
    elif strategy == 'cn':
        if state.path is None:
            raise ParameterError('cn ranking needs an ICI path')
        scores = residual_row_norms(state.path)
        order = _ranked(scores)
    else:
        raise ParameterError(f'unknown baseline strategy {strategy!r}')
    return CredibilityRanking(order, scores, index[:, None].astype(float))


def select_subset(ranking, pseudo_labels, eligible, per_class):
    """Walk the ranking from the most credible row, taking eligible rows
    whose pseudo-class quota is not yet filled.

    `per_class` is a single quota or one quota per class.
    """
    pseudo_labels = np.asarray(pseudo_labels, dtype=np.int64)
    c = int(pseudo_labels.max()) + 1 if pseudo_labels.size else 0
    quota = np.broadcast_to(np.asarray(per_class, dtype=np.int64), (c,)).copy()
    eligible = set(int(i) for i in eligible)
    picked = []
    for i in ranking.order:
        i = int(i)
        if not quota.any():
            break
        if i in eligible and quota[pseudo_labels[i]] > 0:
            quota[pseudo_labels[i]] -= 1
            picked.append(i)
    return tuple(picked)


def trainer(cfg, c):
    """`train(X, y)` for the configured classifier; it returns a predictor."""
    if cfg.classifier == 'logreg':
        def train(X, y):
            clf = fit_logreg(X, y, c, cfg.clf_reg)
            return lambda X_new: predict(clf, X_new)
    else:
        def train(X, y):
            k = min(cfg.knn_k, len(y))
            return lambda X_new: fit_predict_knn(
                X, y, X_new, k=k, metric=cfg.knn_metric, c=c,
            )
    return train


def reduce_rows(cfg, X):
    if cfg.normalize and cfg.normalize_first:
        X = l2_normalize(X)
    Z = reduce_features(X, cfg.reduce, cfg.d, cfg.k_lle, cfg.lle_reg).Z
    if cfg.normalize and not cfg.normalize_first:
        Z = l2_normalize(Z)
    return Z


def ici_path(cfg, Z, Y):
    if cfg.variant == 'icir':
        return fit_path(
            Z, Y, cfg.penalty, cfg.grid_count, cfg.grid_ratio, cfg.tol,
            cfg.max_iter,
        )
    else:
        logit_cfg = LogitPathConfig(
            alpha=cfg.alpha, grid_count=cfg.grid_count,
            grid_ratio=cfg.grid_ratio, tol=cfg.tol,
            max_outer=min(_LOGIT_LIMITS.max_outer, cfg.max_iter),
            max_inner=min(_LOGIT_LIMITS.max_inner, cfg.max_iter),
        )
        return solve_logit_path(Z, Y, logit_cfg, cfg.penalty)


def rank(cfg, state, c):
    """Rank every row with the configured strategy; returns (ranking,
    path) where path is None for path-free strategies.
    """
    path = state.path
    if cfg.selection in ('ici', 'cn') and path is None:
        Y = one_hot(state.labels, c)
        path = ici_path(cfg, state.reduced, Y)
        state = state._replace(path=path)
    if cfg.selection == 'ici':
        return rank_instances(path, state.confidences), path
    else:
        return baseline_rank(cfg.selection, state), path


def _room(cfg, assigned, selected, c):
    """Selections each class may still take under total_cap."""
    if cfg.total_cap is None:
        return np.full(c, selected.size, dtype=np.int64)
    taken = np.bincount(assigned[selected], minlength=c)
    return np.maximum(cfg.total_cap - taken, 0)


def _pick(cfg, ranking, labels, eligible, room):
    """per_class_per_iter rows per pseudo-class; places a class leaves
    empty go to the next most credible rows of classes with room left, so
    a round takes c * per_class_per_iter rows while the pool lasts.
    """
    picks = select_subset(
        ranking, labels, eligible, np.minimum(cfg.per_class_per_iter, room),
    )
    spare = room.size * cfg.per_class_per_iter - len(picks)
    if spare > 0 and picks:
        taken = np.bincount(labels[list(picks)], minlength=room.size)
        rest = np.setdiff1d(eligible, picks)
        picks += select_subset(ranking, labels, rest, room - taken)[:spare]
    return picks


def _accuracy(prediction, truth):
    if truth.size == 0:
        return float('nan')
    return float(np.mean(prediction.label == truth))


def run_episode(ep, cfg=LoopConfig()):
    validate_loop_config(cfg)
    c = ep.ways
    train = trainer(cfg, c)
    Xs, Xu, Xq = ep.support_x, ep.unlabeled_x, ep.query_x
    if cfg.normalize:
        Xs, Xu, Xq = l2_normalize(Xs), l2_normalize(Xu), l2_normalize(Xq)
    ys = np.asarray(ep.support_y, dtype=np.int64)
    n_s, U = ys.size, Xu.shape[0]

    predictor = train(Xs, ys)
    base_accuracy = _accuracy(predictor(Xq), ep.query_y)

    Z = None
    if U and cfg.selection in ('ici', 'nn', 'cn'):
        Z = reduce_rows(cfg, np.vstack((ep.support_x, ep.unlabeled_x)))

    selected = np.zeros(U, dtype=bool)
    assigned = np.full(U, -1, dtype=np.int64)
    records = []
    nonconverged = grid_points = 0
    while selected.size and not selected.all():
        if cfg.max_rounds is not None and len(records) >= cfg.max_rounds:
            break
        room = _room(cfg, assigned, selected, c)
        if not room.any():
            break

        pred = predictor(Xu)
        pseudo = np.where(selected, assigned, pred.label)
        confidence = pred.proba[np.arange(U), pseudo]
        state = RankState(
            reduced=Z,
            labels=np.concatenate((ys, pseudo)),
            confidences=np.concatenate((np.ones(n_s), confidence)),
            labeled=np.concatenate((np.ones(n_s, dtype=bool), selected)),
            seed=(cfg.seed, ep.seed, len(records)),
        )
        ranking, path = rank(cfg, state, c)
        if path is not None:
            nonconverged += path.nonconverged
            grid_points += path.lambdas.size

        eligible = n_s + np.flatnonzero(~selected)
        picks = _pick(cfg, ranking, state.labels, eligible, room)
        if not picks:
            break
        local = np.asarray(picks) - n_s
        selected[local] = True
        assigned[local] = pseudo[local]
        records.append(IterationRecord(
            selected=tuple(int(i) for i in local),
            pseudo_labels=tuple(int(label) for label in pseudo[local]),
            correct=tuple(
                bool(ok) for ok in pseudo[local] == ep.unlabeled_truth[local]
            ),
        ))
        predictor = train(
            np.vstack((Xs, Xu[selected])),
            np.concatenate((ys, assigned[selected])),
        )

    result = EpisodeResult(
        query_accuracy=_accuracy(predictor(Xq), ep.query_y),
        base_accuracy=base_accuracy,
        records=tuple(records),
        iterations=len(records),
        converged=nonconverged == 0,
        nonconverged=nonconverged,
        grid_points=grid_points,
        seed=ep.seed,
    )
    logger.debug(
        'episode seed=%d: %d iterations, accuracy %.4f (base %.4f)',
        ep.seed, result.iterations, result.query_accuracy,
        result.base_accuracy,
    )
    return result


class RoundView(NamedTuple):
    """The first round of an episode, rows ordered support then pool."""
    path: GammaPath
    ranking: CredibilityRanking
    labels: np.ndarray
    selected: Tuple[int, ...]
    correct: np.ndarray


def first_round(ep, cfg=LoopConfig()):
    if cfg.selection not in ('ici', 'cn'):
        raise ParameterError(
            f'selection {cfg.selection!r} does not fit a path',
        )
    if not ep.unlabeled_x.shape[0]:
        raise ParameterError('episode has no unlabeled instances')
    validate_loop_config(cfg)
    c = ep.ways
    Xs, Xu = ep.support_x, ep.unlabeled_x
    if cfg.normalize:
        Xs, Xu = l2_normalize(Xs), l2_normalize(Xu)
    ys = np.asarray(ep.support_y, dtype=np.int64)
    n_s = ys.size
    pred = trainer(cfg, c)(Xs, ys)(Xu)
    state = RankState(
        reduced=reduce_rows(cfg, np.vstack((ep.support_x, ep.unlabeled_x))),
        labels=np.concatenate((ys, pred.label)),
        confidences=np.concatenate((np.ones(n_s), pred.confidence)),
        labeled=np.concatenate((
            np.ones(n_s, dtype=bool), np.zeros(pred.label.size, dtype=bool),
        )),
        seed=(cfg.seed, ep.seed, 0),
    )
    ranking, path = rank(cfg, state, c)
    eligible = n_s + np.arange(pred.label.size)
    room = _room(
        cfg, np.full(pred.label.size, -1), np.zeros(pred.label.size, bool), c,
    )
    return RoundView(
        path=path,
        ranking=ranking,
        labels=state.labels,
        selected=_pick(cfg, ranking, state.labels, eligible, room),
        correct=np.concatenate((
            np.ones(n_s, dtype=bool), pred.label == ep.unlabeled_truth,
        )),
    )


_worker_store = None


def _init_worker(store):
    global _worker_store
    _worker_store = store


def _run_seed(args):
    spec, cfg, seed = args
    return run_episode(sample_episode(_worker_store, spec, seed), cfg)


def run_episodes(store, spec, cfg, episodes, master_seed=0, jobs=1):
    """Run `episodes` independent episodes; results come back in episode
    index order whatever the worker count.
    """
    validate_loop_config(cfg)
    if episodes < 0:
        raise ParameterError(f'episodes must be >= 0, got {episodes}')
    tasks = [
        (spec, cfg, episode_seed(master_seed, i)) for i in range(episodes)
    ]
    if jobs <= 1 or episodes <= 1:
        _init_worker(store)
        try:
            results = [_run_seed(task) for task in tasks]
        finally:
            _init_worker(None)
    else:
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=jobs, initializer=_init_worker, initargs=(store,),
        ) as executor:
            chunksize = max(1, episodes // (4 * jobs))
            results = list(executor.map(_run_seed, tasks, chunksize=chunksize))
    logger.info(
        'ran %d episodes (%s, selection=%s)', episodes, cfg.variant,
        cfg.selection,
    )
    return results


def evaluate(results, per_class_per_iter=None, total_cap=None):
    """Mean query accuracy with a 95% interval, 1.96 * sd / sqrt(E)."""
    results = list(results)
    if not results:
        raise ParameterError('no episode results to evaluate')
    accuracies = np.array([r.query_accuracy for r in results])
    finite = accuracies[~np.isnan(accuracies)]
    episodes = finite.size
    if episodes:
        mean = float(finite.mean())
    else:
        mean = float('nan')
    if episodes > 1:
        ci95 = Z_95 * float(finite.std(ddof=1)) / math.sqrt(episodes)
    else:
        ci95 = 0.0

    depth = max(r.iterations for r in results)
    precision = []
    for t in range(depth):
        values = [
            r.records[t].precision for r in results
            if t < r.iterations and r.records[t].correct
        ]
        precision.append(float(np.mean(values)) if values else float('nan'))

    return AccuracyReport(
        episodes=len(results),
        mean=mean,
        ci95=ci95,
        accuracies=tuple(float(a) for a in accuracies),
        precision_per_iteration=tuple(precision),
        excluded=len(results) - episodes,
        per_class_per_iter=per_class_per_iter,
        total_cap=total_cap,
        nonconverged=sum(r.nonconverged for r in results),
        grid_points=sum(r.grid_points for r in results),
    )
