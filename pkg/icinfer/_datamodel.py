import csv
import io
import logging
import os.path
import struct

import numpy as np

from icinfer._error import LoadError
from icinfer._error import ParameterError
from icinfer._error import RangeError
from icinfer._error import SamplingError
from icinfer._error import SynthError
from icinfer.types import Episode
from icinfer.types import EpisodeSpec
from icinfer.types import FeatureStore
from icinfer.types import MODES

logger = logging.getLogger(__name__)

ICIF_MAGIC = b'ICIF'
ICIF_VERSION = 1
ICIF_HEADER = struct.Struct('<4sIIII')
FORMATS = ('csv', 'icif')

_MAX_PLACEMENT_ATTEMPTS = 1000


def _remap_labels(raw):
    """contiguous ids 0..c-1 in first-appearance order"""
    mapping = {}
    for label in raw:
        mapping.setdefault(int(label), len(mapping))
    remapped = np.array([mapping[int(label)] for label in raw], dtype=np.int64)
    return remapped, len(mapping)


def feature_store(features, labels, class_count=None, meta=''):
    """Validate and build a FeatureStore."""
    features = np.array(features)
    labels = np.array(labels, dtype=np.int64)
    if features.ndim != 2:
        raise ParameterError(f'features must be 2-d, got {features.ndim}-d')
    if labels.shape != (features.shape[0],):
        raise ParameterError(
            f'expected {features.shape[0]} labels, got {labels.shape[0]}',
        )
    if class_count is None:
        class_count = int(labels.max()) + 1 if labels.size else 0
    if labels.size and (labels.min() < 0 or labels.max() >= class_count):
        raise RangeError(f'label ids must lie in [0, {class_count})')
    if features.shape[0] < class_count:
        raise ParameterError(
            f'{features.shape[0]} rows cannot hold {class_count} classes',
        )
    if not np.isfinite(features).all():
        raise ParameterError('features contain NaN or Inf')
    features.setflags(write=False)
    labels.setflags(write=False)
    return FeatureStore(features, labels, int(class_count), meta)


def _infer_format(path, fmt):
    if fmt is not None:
        if fmt not in FORMATS:
            raise ParameterError(f'unknown feature format {fmt!r}')
        return fmt
    _, ext = os.path.splitext(path)
    if ext.lower() == '.csv':
        return 'csv'
    else:
        return 'icif'


def _load_csv(path):
    with open(path, encoding='UTF-8', newline='') as f:
        rows = list(csv.reader(f))
    if not rows:
        raise LoadError(path, 'no rows')

    header = rows[0]
    if not header or header[0] != 'label':
        raise LoadError(path, 'label column missing', line=1)
    dim = len(header) - 1
    expected = [f'f{i}' for i in range(dim)]
    if dim == 0 or header[1:] != expected:
        raise LoadError(
            path, f'malformed header, expected label,f0,...,f{dim - 1}',
            line=1,
        )
    if len(rows) == 1:
        raise LoadError(path, 'no rows')

    raw_labels = []
    features = np.empty((len(rows) - 1, dim), dtype=np.float64)
    for i, row in enumerate(rows[1:]):
        lineno = i + 2
        if len(row) != dim + 1:
            raise LoadError(
                path, f'ragged row: expected {dim + 1} fields, got {len(row)}',
                line=lineno,
            )
        try:
            raw_labels.append(int(row[0]))
        except ValueError:
            raise LoadError(path, f'bad label {row[0]!r}', line=lineno)
        try:
            values = [float(v) for v in row[1:]]
        except ValueError as e:
            raise LoadError(path, f'bad value: {e}', line=lineno)
        if not all(np.isfinite(values)):
            raise LoadError(path, 'NaN or Inf entry', line=lineno)
        features[i] = values

    labels, class_count = _remap_labels(raw_labels)
    return feature_store(features, labels, class_count, meta=f'csv:{path}')


def _load_icif(path):
    with open(path, 'rb') as f:
        data = f.read()
    if not data:
        raise LoadError(path, 'no rows', offset=0)
    if len(data) < ICIF_HEADER.size:
        raise LoadError(path, 'truncated header', offset=len(data))
    magic, version, n, dim, c = ICIF_HEADER.unpack_from(data, 0)
    if magic != ICIF_MAGIC:
        raise LoadError(path, f'bad magic {magic!r}', offset=0)
    if version != ICIF_VERSION:
        raise LoadError(path, f'unsupported version {version}', offset=4)
    if n == 0:
        raise LoadError(path, 'no rows', offset=8)

    offset = ICIF_HEADER.size
    expected = offset + 4 * n + 4 * n * dim
    if len(data) != expected:
        raise LoadError(
            path, f'expected {expected} bytes, got {len(data)}',
            offset=min(len(data), expected),
        )
    raw_labels = np.frombuffer(data, dtype='<u4', count=n, offset=offset)
    offset += 4 * n
    features = np.frombuffer(data, dtype='<f4', count=n * dim, offset=offset)
    features = features.reshape(n, dim).astype(np.float32)

    bad = np.flatnonzero(raw_labels >= c)
    if bad.size:
        raise LoadError(
            path, f'label {raw_labels[bad[0]]} >= class count {c}',
            offset=ICIF_HEADER.size + 4 * int(bad[0]),
        )
    nonfinite = np.flatnonzero(~np.isfinite(features).all(axis=1))
    if nonfinite.size:
        row = int(nonfinite[0])
        raise LoadError(
            path, f'NaN or Inf entry in row {row}',
            offset=ICIF_HEADER.size + 4 * n + 4 * dim * row,
        )

    # the header carries the class count; ids are kept as written
    labels = raw_labels.astype(np.int64)
    return feature_store(features, labels, c, meta=f'icif:{path}')


def load_features(path, fmt=None):
    """Read a FeatureStore from a csv or icif file.

    The format is inferred from the extension when `fmt` is None (`.csv`
    means csv, anything else icif).  Features are never normalized here.
    """
    fmt = _infer_format(path, fmt)
    if not os.path.exists(path):
        raise LoadError(path, 'no such file')
    if fmt == 'csv':
        store = _load_csv(path)
    else:
        store = _load_icif(path)
    logger.debug(
        'loaded %s: n=%d D=%d c=%d', path, *store.shape, store.class_count,
    )
    return store


def dumps_icif(store):
    n, dim = store.shape
    buf = io.BytesIO()
    buf.write(
        ICIF_HEADER.pack(ICIF_MAGIC, ICIF_VERSION, n, dim, store.class_count),
    )
    buf.write(np.asarray(store.labels, dtype='<u4').tobytes())
    buf.write(np.asarray(store.features, dtype='<f4').tobytes(order='C'))
    return buf.getvalue()


def dumps_csv(store):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    dim = store.shape[1]
    writer.writerow(['label'] + [f'f{i}' for i in range(dim)])
    for label, row in zip(store.labels, store.features):
        writer.writerow([int(label)] + [repr(float(v)) for v in row])
    return buf.getvalue()


def write_features(store, path, fmt=None):
    fmt = _infer_format(path, fmt)
    if fmt == 'csv':
        with open(path, 'w', encoding='UTF-8', newline='') as f:
            f.write(dumps_csv(store))
    else:
        with open(path, 'wb') as f:
            f.write(dumps_icif(store))


def episode_seed(master, index):
    return master ^ index


def validate_spec(spec):
    if spec.mode not in MODES:
        raise ParameterError(f'unknown mode {spec.mode!r}')
    if spec.ways < 2:
        raise ParameterError(f'ways must be >= 2, got {spec.ways}')
    if spec.shots < 1:
        raise ParameterError(f'shots must be >= 1, got {spec.shots}')
    if spec.queries < 0 or spec.unlabeled < 0:
        raise ParameterError('queries and unlabeled must be >= 0')


def sample_episode(store, spec, seed):
    """Draw one c-way-s-shot episode; a pure function of its arguments.

    Classes are relabelled 0..ways-1 in the order they were drawn.  In
    transductive mode the unlabeled pool is the query set.
    """
    validate_spec(spec)
    if spec.ways > store.class_count:
        raise SamplingError(
            (), f'{spec.ways}-way episode from {store.class_count} classes',
        )
    rng = np.random.default_rng(seed)
    classes = rng.choice(store.class_count, size=spec.ways, replace=False)

    members = [np.flatnonzero(store.labels == cls) for cls in classes]
    needed = spec.needed_per_class
    small = [
        int(cls) for cls, idx in zip(classes, members) if idx.size < needed
    ]
    if small:
        raise SamplingError(
            small, f'class has fewer than {needed} instances',
        )

    semi = spec.mode == 'semi-supervised'
    support, query, unlabeled = [], [], []
    for idx in members:
        perm = rng.permutation(idx)
        support.append(perm[:spec.shots])
        query.append(perm[spec.shots:spec.shots + spec.queries])
        if semi:
            start = spec.shots + spec.queries
            unlabeled.append(perm[start:start + spec.unlabeled])

    ways = np.arange(spec.ways)
    support_index = np.concatenate(support)
    query_index = np.concatenate(query)
    support_y = np.repeat(ways, spec.shots)
    query_y = np.repeat(ways, spec.queries)
    if semi:
        unlabeled_index = np.concatenate(unlabeled)
        unlabeled_truth = np.repeat(ways, spec.unlabeled)
    else:
        unlabeled_index = query_index
        unlabeled_truth = query_y

    def rows(index):
        return np.asarray(store.features[index], dtype=np.float64)

    return Episode(
        support_x=rows(support_index),
        support_y=support_y,
        query_x=rows(query_index),
        query_y=query_y,
        unlabeled_x=rows(unlabeled_index),
        unlabeled_truth=unlabeled_truth,
        classes=tuple(int(cls) for cls in classes),
        support_index=support_index,
        query_index=query_index,
        unlabeled_index=unlabeled_index,
        seed=seed,
        mode=spec.mode,
    )


def _place_means(rng, c, dim, separation):
    if separation == 0:
        return np.zeros((c, dim))
    means = []
    for _ in range(c):
        for _ in range(_MAX_PLACEMENT_ATTEMPTS):
            direction = rng.standard_normal(dim)
            norm = np.linalg.norm(direction)
            if norm == 0:
                continue
            candidate = direction / norm * separation
            if all(
                    np.linalg.norm(candidate - mean) >= separation
                    for mean in means
            ):
                means.append(candidate)
                break
        else:
            raise SynthError(
                f'could not place {c} means at pairwise distance '
                f'{separation} in {dim} dimensions',
            )
    return np.array(means)


def synth_gaussian(c, per_class, dim, separation, noise_sigma, seed):
    """Spherical gaussian classes with means on a sphere of radius
    `separation`, pairwise at least `separation` apart.
    """
    if c < 2:
        raise ParameterError(f'c must be >= 2, got {c}')
    if per_class < 1:
        raise ParameterError(f'per_class must be >= 1, got {per_class}')
    if dim < 1:
        raise ParameterError(f'dim must be >= 1, got {dim}')
    if separation < 0 or noise_sigma < 0:
        raise ParameterError('separation and noise_sigma must be >= 0')

    rng = np.random.default_rng(seed)
    means = _place_means(rng, c, dim, separation)
    labels = np.repeat(np.arange(c), per_class)
    features = means[labels]
    if noise_sigma > 0:
        features = features + noise_sigma * rng.standard_normal(features.shape)
    meta = (
        f'synthetic:c={c},per_class={per_class},dim={dim},'
        f'separation={separation!r},sigma={noise_sigma!r},seed={seed}'
    )
    return feature_store(features, labels, c, meta=meta)


def one_hot(labels, c):
    labels = np.asarray(labels, dtype=np.int64)
    bad = labels[(labels < 0) | (labels >= c)]
    if bad.size:
        raise RangeError(f'label {int(bad[0])} out of range for {c} classes')
    Y = np.zeros((labels.size, c))
    Y[np.arange(labels.size), labels] = 1.0
    return Y


def l2_normalize(X):
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return np.divide(X, norms, out=X.copy(), where=norms > 0)
