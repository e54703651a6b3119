"""Run configuration: a flat `key: value` document with a fixed schema.

    # 5-way 1-shot transductive run
    input: 'features.icif'
    ways: 5
    selection: ici  # or ra, nn, co, cn
    compare: [ra, co]

Values are booleans, `null`, integers, floats, quoted strings, bare words or
inline lists of those.  Every key of the schema may also be given on the
command line as `--key-with-dashes VALUE`; flags override the file, which
overrides the defaults.
"""
import argparse
from typing import NamedTuple
from typing import Optional
from typing import Tuple

from icinfer import _tokenize
from icinfer._datamodel import FORMATS
from icinfer._error import ConfigError
from icinfer._error import ParseError
from icinfer._tokenize import tokenize
from icinfer._tokenize import tokens_to_src_offset
from icinfer.types import CLASSIFIERS
from icinfer.types import EpisodeSpec
from icinfer.types import LoopConfig
from icinfer.types import METRICS
from icinfer.types import MODES
from icinfer.types import PENALTIES
from icinfer.types import REDUCERS
from icinfer.types import SELECTIONS
from icinfer.types import VARIANTS


class RunConfig(NamedTuple):
    input: Optional[str] = None
    format: Optional[str] = None
    report: Optional[str] = None
    table: Optional[str] = None
    mode: str = 'transductive'
    ways: int = 5
    shots: int = 1
    queries: int = 15
    unlabeled: int = 0
    episodes: int = 2000
    seed: int = 0
    jobs: int = 1
    variant: str = 'icir'
    selection: str = 'ici'
    compare: Tuple[str, ...] = ()
    penalty: str = 'group_l2'
    reduce: str = 'lle'
    d: int = 5
    k_lle: int = 5
    lle_reg: float = 1e-3
    normalize: bool = True
    normalize_first: bool = True
    per_class_per_iter: int = 5
    total_cap: Optional[int] = None
    max_rounds: Optional[int] = None
    grid_count: int = 100
    grid_ratio: float = 1e-3
    tol: float = 1e-6
    max_iter: int = 10000
    alpha: float = 0.5
    classifier: str = 'logreg'
    clf_reg: Optional[float] = None
    knn_k: int = 1
    knn_metric: str = 'euclidean'
    max_nonconverged: float = 0.01


def _wrong_type(key, val, what):
    raise ConfigError(f'{key}: expected {what}, got {val!r}')


def _int(key, val):
    if isinstance(val, bool) or not isinstance(val, int):
        _wrong_type(key, val, 'an integer')
    return val


def _float(key, val):
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        _wrong_type(key, val, 'a number')
    return float(val)


def _bool(key, val):
    if not isinstance(val, bool):
        _wrong_type(key, val, 'true or false')
    return val


def _str(key, val):
    if not isinstance(val, str):
        _wrong_type(key, val, 'a string')
    return val


def _choice(*options):
    def convert(key, val):
        if val not in options:
            raise ConfigError(
                f'{key}: expected one of {", ".join(options)}, got {val!r}',
            )
        return val
    return convert


def _optional(convert):
    def optional(key, val):
        return None if val is None else convert(key, val)
    return optional


def _list_of(convert):
    def list_of(key, val):
        if isinstance(val, str):
            val = [part.strip() for part in val.split(',') if part.strip()]
        if not isinstance(val, list):
            _wrong_type(key, val, 'a list')
        return tuple(convert(key, item) for item in val)
    return list_of


def _at_least(low):
    def check(val):
        if val is not None and val < low:
            return f'must be >= {low}'
    return check


def _positive(val):
    if val is not None and val <= 0:
        return 'must be > 0'


def _fraction(val):
    if not 0 < val < 1:
        return 'must be in (0, 1)'


def _unit_interval(val):
    if not 0 <= val <= 1:
        return 'must be in [0, 1]'


SCHEMA = {
    'input': (_optional(_str), None),
    'format': (_optional(_choice(*FORMATS)), None),
    'report': (_optional(_str), None),
    'table': (_optional(_str), None),
    'mode': (_choice(*MODES), None),
    'ways': (_int, _at_least(2)),
    'shots': (_int, _at_least(1)),
    'queries': (_int, _at_least(0)),
    'unlabeled': (_int, _at_least(0)),
    'episodes': (_int, _at_least(1)),
    'seed': (_int, _at_least(0)),
    'jobs': (_int, _at_least(1)),
    'variant': (_choice(*VARIANTS), None),
    'selection': (_choice(*SELECTIONS), None),
    'compare': (_list_of(_choice(*SELECTIONS)), None),
    'penalty': (_choice(*PENALTIES), None),
    'reduce': (_choice(*REDUCERS), None),
    'd': (_int, _at_least(1)),
    'k_lle': (_int, _at_least(1)),
    'lle_reg': (_float, _positive),
    'normalize': (_bool, None),
    'normalize_first': (_bool, None),
    'per_class_per_iter': (_int, _at_least(1)),
    'total_cap': (_optional(_int), _at_least(0)),
    'max_rounds': (_optional(_int), _at_least(0)),
    'grid_count': (_int, _at_least(1)),
    'grid_ratio': (_float, _fraction),
    'tol': (_float, _positive),
    'max_iter': (_int, _at_least(1)),
    'alpha': (_float, _positive),
    'classifier': (_choice(*CLASSIFIERS), None),
    'clf_reg': (_optional(_float), _positive),
    'knn_k': (_int, _at_least(1)),
    'knn_metric': (_choice(*METRICS), None),
    'max_nonconverged': (_float, _unit_interval),
}
assert tuple(SCHEMA) == RunConfig._fields


def _expected(tokens, index, *types, filename=None):
    src, offset = tokens_to_src_offset(tokens, index)
    msg = 'Expected one of ({}) but received {}'.format(
        ', '.join(tp.__name__ for tp in types), type(tokens[index]).__name__,
    )
    raise ParseError(src, offset, msg, filename)


def _get(tokens, index, *types, filename=None):
    if not isinstance(tokens[index], types):
        _expected(tokens, index, *types, filename=filename)
    return tokens[index], index + 1


def _skip(tokens, index, *types):
    while isinstance(tokens[index], types):
        index += 1
    return index


def _parse_val(tokens, index, filename=None):
    if isinstance(tokens[index], _tokenize.SCALARS):
        return tokens[index].val, index + 1
    _, index = _get(
        tokens, index, _tokenize.ListStart, *_tokenize.SCALARS,
        filename=filename,
    )
    items = []
    index = _skip(tokens, index, _tokenize.Space)
    while not isinstance(tokens[index], _tokenize.ListEnd):
        if items:
            _, index = _get(
                tokens, index, _tokenize.Comma, _tokenize.ListEnd,
                filename=filename,
            )
            index = _skip(tokens, index, _tokenize.Space)
        token, index = _get(
            tokens, index, *_tokenize.SCALARS, filename=filename,
        )
        items.append(token.val)
        index = _skip(tokens, index, _tokenize.Space)
    return items, index + 1


def parse_entries(src, filename=None):
    """`(key, value, offset)` for every entry of a flat document."""
    tokens = tokenize(src, filename=filename)
    entries = []
    index = 0
    while True:
        index = _skip(tokens, index, _tokenize.Space)
        if isinstance(tokens[index], _tokenize.EOF):
            return entries
        elif isinstance(tokens[index], (_tokenize.NL, _tokenize.Comment)):
            index += 1
            continue
        key, index = _get(tokens, index, _tokenize.BareWord, filename=filename)
        _, offset = tokens_to_src_offset(tokens, index - 1)
        _, index = _get(tokens, index, _tokenize.Colon, filename=filename)
        _, index = _get(tokens, index, _tokenize.Space, filename=filename)
        val, index = _parse_val(tokens, index, filename=filename)
        index = _skip(tokens, index, _tokenize.Space, _tokenize.Comment)
        _get(tokens, index, _tokenize.NL, _tokenize.EOF, filename=filename)
        entries.append((key.val, val, offset))


def _convert(key, val):
    if key not in SCHEMA:
        raise ConfigError(f'unknown key {key!r}')
    convert, check = SCHEMA[key]
    val = convert(key, val)
    problem = check(val) if check is not None else None
    if problem:
        raise ConfigError(f'{key}: {problem}, got {val!r}')
    return val


def loads_config(src, filename=None, overrides=None, base=None):
    """Parse and validate a configuration document.

    `overrides` maps keys to already parsed values and wins over the
    document; `base` supplies the defaults.
    """
    where = filename or '<config>'
    values = {}
    for key, val, offset in parse_entries(src, filename):
        line = src.count('\n', 0, offset) + 1
        if key in values:
            raise ConfigError(f'{where}:{line}: duplicate key {key!r}')
        try:
            values[key] = _convert(key, val)
        except ConfigError as e:
            raise ConfigError(f'{where}:{line}: {e}')
    for key, val in (overrides or {}).items():
        values[key] = _convert(key, val)
    return (base or RunConfig())._replace(**values)


def load_config(path, overrides=None):
    try:
        with open(path, encoding='UTF-8') as f:
            src = f.read()
    except OSError as e:
        raise ConfigError(f'{path}: {e.strerror}')
    return loads_config(src, filename=path, overrides=overrides)


def dumps_config(cfg):
    lines = []
    for key, val in zip(cfg._fields, cfg):
        if isinstance(val, tuple):
            rendered = '[{}]'.format(
                ', '.join(_tokenize.dump_scalar(item) for item in val),
            )
        else:
            rendered = _tokenize.dump_scalar(val)
        lines.append(f'{key}: {rendered}\n')
    return ''.join(lines)


def parse_flag_value(text):
    """A flag value in the document grammar; unparseable text stays a
    string so paths need no quoting on the command line.
    """
    try:
        tokens = tokenize(text)
        val, index = _parse_val(tokens, 0)
        _get(tokens, index, _tokenize.EOF)
    except ParseError:
        return text
    return val


def add_config_arguments(parser):
    group = parser.add_argument_group('configuration overrides')
    for key in SCHEMA:
        group.add_argument(
            '--{}'.format(key.replace('_', '-')),
            dest=key, default=argparse.SUPPRESS, metavar='VALUE',
            type=parse_flag_value,
        )


def resolve_config(path, args):
    """defaults < config file at `path` < flags present in `args`"""
    overrides = {key: getattr(args, key) for key in SCHEMA if key in args}
    if path is None:
        return loads_config('', overrides=overrides)
    else:
        return load_config(path, overrides)


def loop_config(cfg, selection=None):
    return LoopConfig(
        variant=cfg.variant,
        per_class_per_iter=cfg.per_class_per_iter,
        total_cap=cfg.total_cap,
        max_rounds=cfg.max_rounds,
        selection=selection or cfg.selection,
        penalty=cfg.penalty,
        reduce=cfg.reduce,
        d=cfg.d,
        k_lle=cfg.k_lle,
        lle_reg=cfg.lle_reg,
        normalize=cfg.normalize,
        normalize_first=cfg.normalize_first,
        grid_count=cfg.grid_count,
        grid_ratio=cfg.grid_ratio,
        tol=cfg.tol,
        max_iter=cfg.max_iter,
        alpha=cfg.alpha,
        classifier=cfg.classifier,
        clf_reg=cfg.clf_reg,
        knn_k=cfg.knn_k,
        knn_metric=cfg.knn_metric,
        seed=cfg.seed,
    )


def episode_spec(cfg):
    return EpisodeSpec(
        ways=cfg.ways,
        shots=cfg.shots,
        queries=cfg.queries,
        unlabeled=cfg.unlabeled,
        mode=cfg.mode,
    )
