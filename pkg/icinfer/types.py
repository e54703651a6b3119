"""Immutable records passed between the icinfer stages.

Arrays stored in these records are never mutated after construction, so a
record may be shared freely between concurrent episode workers.
"""
from typing import NamedTuple
from typing import Optional
from typing import Tuple

import numpy as np

MODES = ('transductive', 'semi-supervised')
PENALTIES = ('group_l2', 'l1')
REDUCERS = ('lle', 'pca', 'none')
SELECTIONS = ('ici', 'ra', 'nn', 'co', 'cn')
VARIANTS = ('icir', 'icic')
CLASSIFIERS = ('logreg', 'knn')
METRICS = ('euclidean', 'cosine')


class FeatureStore(NamedTuple):
    features: np.ndarray
    labels: np.ndarray
    class_count: int
    meta: str = ''

    @property
    def shape(self):
        return self.features.shape


class EpisodeSpec(NamedTuple):
    ways: int
    shots: int
    queries: int = 15
    unlabeled: int = 0
    mode: str = 'transductive'

    @property
    def pool_per_class(self):
        """Unlabeled instances per class as seen by the learner."""
        if self.mode == 'transductive':
            return self.queries
        else:
            return self.unlabeled

    @property
    def needed_per_class(self):
        if self.mode == 'transductive':
            return self.shots + self.queries
        else:
            return self.shots + self.queries + self.unlabeled


class Episode(NamedTuple):
    support_x: np.ndarray
    support_y: np.ndarray
    query_x: np.ndarray
    query_y: np.ndarray
    unlabeled_x: np.ndarray
    # diagnostics only: never handed to a solver or classifier
    unlabeled_truth: np.ndarray
    classes: Tuple[int, ...]
    support_index: np.ndarray
    query_index: np.ndarray
    unlabeled_index: np.ndarray
    seed: int
    mode: str = 'transductive'

    @property
    def ways(self):
        return len(self.classes)


class ReducedFeatures(NamedTuple):
    Z: np.ndarray
    method: str
    d: int
    requested_d: Optional[int] = None


class Annihilator(NamedTuple):
    xtilde: np.ndarray
    rank: int
    rcond: float
    # orthonormal basis of the column space of X, n x rank
    basis: np.ndarray


class LambdaGrid(NamedTuple):
    values: np.ndarray
    count: int
    ratio: float

    @property
    def lambda_max(self):
        return float(self.values[0])


class GammaPath(NamedTuple):
    lambdas: np.ndarray
    # one n x c matrix per grid point
    gammas: np.ndarray
    penalty: str
    vanish_lambda: np.ndarray
    residual_norms: np.ndarray
    converged: np.ndarray
    n_iter: np.ndarray
    tol: float
    variant: str = 'linear'
    betas: Optional[np.ndarray] = None

    @property
    def nonconverged(self):
        return int(np.count_nonzero(~self.converged))


class CredibilityRanking(NamedTuple):
    order: np.ndarray
    scores: np.ndarray
    # columns: residual row norm, confidence, index
    tiebreak: np.ndarray


class AugmentedDesign(NamedTuple):
    xbar: np.ndarray
    d: int
    n: int


class LogitPathConfig(NamedTuple):
    alpha: float = 0.5
    grid_count: int = 100
    grid_ratio: float = 1e-3
    tol: float = 1e-6
    max_outer: int = 100
    max_inner: int = 1000
    grid: Optional[LambdaGrid] = None


class LinearClassifier(NamedTuple):
    W: np.ndarray
    b: np.ndarray
    reg: float
    trained: bool = True

    @property
    def class_count(self):
        return self.W.shape[1]


class Prediction(NamedTuple):
    """Batched predictions: `label[i]` is the argmax of `proba[i]`."""
    label: np.ndarray
    proba: np.ndarray

    @property
    def confidence(self):
        return self.proba[np.arange(len(self.label)), self.label]


class LoopConfig(NamedTuple):
    variant: str = 'icir'
    per_class_per_iter: int = 5
    total_cap: Optional[int] = None
    max_rounds: Optional[int] = None
    selection: str = 'ici'
    penalty: str = 'group_l2'
    reduce: str = 'lle'
    d: int = 5
    k_lle: int = 5
    lle_reg: float = 1e-3
    normalize: bool = True
    normalize_first: bool = True
    grid_count: int = 100
    grid_ratio: float = 1e-3
    tol: float = 1e-6
    max_iter: int = 10000
    alpha: float = 0.5
    classifier: str = 'logreg'
    clf_reg: Optional[float] = None
    knn_k: int = 1
    knn_metric: str = 'euclidean'
    seed: int = 0


class IterationRecord(NamedTuple):
    # positions within the unlabeled pool
    selected: Tuple[int, ...]
    pseudo_labels: Tuple[int, ...]
    correct: Tuple[bool, ...]

    @property
    def precision(self):
        if not self.correct:
            return float('nan')
        return sum(self.correct) / len(self.correct)


class EpisodeResult(NamedTuple):
    query_accuracy: float
    base_accuracy: float
    records: Tuple[IterationRecord, ...]
    iterations: int
    converged: bool
    nonconverged: int = 0
    grid_points: int = 0
    seed: int = 0


class AccuracyReport(NamedTuple):
    episodes: int
    mean: float
    ci95: float
    accuracies: Tuple[float, ...]
    precision_per_iteration: Tuple[float, ...]
    excluded: int = 0
    per_class_per_iter: Optional[int] = None
    total_cap: Optional[int] = None
    nonconverged: int = 0
    grid_points: int = 0


class VectorizedModel(NamedTuple):
    n: int
    c: int
    d: int
    rank: int
    # n x (n - rank) orthonormal basis of the orthogonal complement of
    # col(X); Utilde = I_c (x) u2.T is never formed
    u2: np.ndarray
    y_u: np.ndarray

    @property
    def rows(self):
        return self.c * (self.n - self.rank)


class ConditionReport(NamedTuple):
    C_min: float
    eta: float
    gamma_min: float
    h: float
    mu: float
    verdict_c1: bool
    verdict_c2: bool
    verdict_c3: bool
    S: Tuple[int, ...]
    O: Tuple[int, ...]
    S_hat: Optional[Tuple[int, ...]] = None
    O_hat: Optional[Tuple[int, ...]] = None
    sign_consistent: Optional[bool] = None


class RecoveryOutcome(NamedTuple):
    seed: int
    lam: float
    lam_source: str
    report: ConditionReport
    subset: bool
    exact: bool
    sign_consistent: bool
    sup_error: float
    within_h: bool
    o_subset: bool


class FrequencyRow(NamedTuple):
    bucket: str
    improved: int
    total: int

    @property
    def ratio(self):
        if not self.total:
            return float('nan')
        return self.improved / self.total


class Histogram(NamedTuple):
    edges: np.ndarray
    counts: np.ndarray
    mean: float
    variance: float

    @property
    def total(self):
        return int(self.counts.sum())
