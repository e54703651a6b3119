import argparse

import pytest

from icinfer._config import add_config_arguments
from icinfer._config import dumps_config
from icinfer._config import episode_spec
from icinfer._config import load_config
from icinfer._config import loads_config
from icinfer._config import loop_config
from icinfer._config import parse_entries
from icinfer._config import parse_flag_value
from icinfer._config import resolve_config
from icinfer._config import RunConfig
from icinfer._error import ConfigError
from icinfer._error import ParseError
from icinfer.types import EpisodeSpec


def test_empty_document_gives_defaults():
    assert loads_config('') == RunConfig()
    assert loads_config('# only a comment\n\n') == RunConfig()


def test_parse_entries_offsets():
    src = 'ways: 5\n# comment\nshots: 1  # inline\n'
    assert parse_entries(src) == [('ways', 5, 0), ('shots', 1, 18)]


def test_loads_config_values():
    cfg = loads_config(
        "input: 'feats.icif'\n"
        'mode: semi-supervised\n'
        'unlabeled: 30\n'
        'compare: [ra, co]\n'
        'total_cap: null\n'
        'normalize: false\n'
        'lle_reg: 1\n',
    )
    assert cfg.input == 'feats.icif'
    assert cfg.mode == 'semi-supervised'
    assert cfg.unlabeled == 30
    assert cfg.compare == ('ra', 'co')
    assert cfg.total_cap is None
    assert cfg.normalize is False
    assert cfg.lle_reg == 1.0
    assert isinstance(cfg.lle_reg, float)


def test_empty_list():
    assert loads_config('compare: []\n').compare == ()


@pytest.mark.parametrize(
    ('src', 'expected'),
    (
        ('bogus: 1\n', "<config>:1: unknown key 'bogus'"),
        ('ways: 5\nways: 6\n', "<config>:2: duplicate key 'ways'"),
        ('ways: 1\n', '<config>:1: ways: must be >= 2, got 1'),
        ('ways: 2.5\n', '<config>:1: ways: expected an integer, got 2.5'),
        ('ways: true\n', '<config>:1: ways: expected an integer, got True'),
        ('tol: fast\n', "<config>:1: tol: expected a number, got 'fast'"),
        (
            'normalize: 1\n',
            '<config>:1: normalize: expected true or false, got 1',
        ),
        (
            'grid_ratio: 1.5\n',
            '<config>:1: grid_ratio: must be in (0, 1), got 1.5',
        ),
        ('episodes: 0\n', '<config>:1: episodes: must be >= 1, got 0'),
        (
            'selection: best\n',
            "<config>:1: selection: expected one of ici, ra, nn, co, cn, "
            "got 'best'",
        ),
        (
            'compare: [ra, zz]\n',
            "<config>:1: compare: expected one of ici, ra, nn, co, cn, "
            "got 'zz'",
        ),
        ('compare: 3\n', '<config>:1: compare: expected a list, got 3'),
    ),
)
def test_config_errors(src, expected):
    with pytest.raises(ConfigError) as excinfo:
        loads_config(src)
    assert str(excinfo.value) == expected


def test_config_error_names_file():
    with pytest.raises(ConfigError) as excinfo:
        loads_config('\n\nd: 0\n', filename='run.yaml')
    assert str(excinfo.value) == 'run.yaml:3: d: must be >= 1, got 0'


def test_parse_error_missing_space():
    with pytest.raises(ParseError) as excinfo:
        loads_config('ways:5\n')
    assert str(excinfo.value) == (
        'Expected one of (Space) but received Int\n\n'
        'Line 1, column 6\n\n'
        'Line|Source\n'
        '----|------------------------------------------------------\n'
        '1   |ways:5\n'
        '          ^\n'
    )


@pytest.mark.parametrize(
    'src',
    (
        '5: ways\n',
        'ways 5\n',
        'ways: 5 6\n',
        'compare: [ra co]\n',
        'compare: [ra,\n',
        'compare: [[ra]]\n',
    ),
)
def test_parse_errors(src):
    with pytest.raises(ParseError):
        loads_config(src)


def test_overrides_win_over_document():
    cfg = loads_config('ways: 3\nshots: 2\n', overrides={'ways': 4})
    assert (cfg.ways, cfg.shots) == (4, 2)


def test_overrides_are_validated():
    with pytest.raises(ConfigError) as excinfo:
        loads_config('', overrides={'episodes': 0})
    assert str(excinfo.value) == 'episodes: must be >= 1, got 0'


def test_dumps_config_round_trip():
    cfg = RunConfig(
        input='a dir/feats.csv', compare=('ra', 'nn'), total_cap=7,
        clf_reg=0.1, tol=1e-9, mode='semi-supervised', normalize=False,
    )
    assert loads_config(dumps_config(cfg)) == cfg
    assert loads_config(dumps_config(RunConfig())) == RunConfig()


def test_dumps_config_format():
    text = dumps_config(RunConfig())
    assert text.startswith('input: null\nformat: null\n')
    assert 'compare: []\n' in text
    assert 'grid_ratio: 0.001\n' in text


@pytest.mark.parametrize(
    ('text', 'expected'),
    (
        ('5', 5),
        ('0.5', 0.5),
        ('true', True),
        ('null', None),
        ('icir', 'icir'),
        ('[ra, co]', ['ra', 'co']),
        ('ra,co', 'ra,co'),
        ('data/feats.icif', 'data/feats.icif'),
    ),
)
def test_parse_flag_value(text, expected):
    assert parse_flag_value(text) == expected


def _args(argv):
    parser = argparse.ArgumentParser()
    add_config_arguments(parser)
    return parser.parse_args(argv)


def test_flags_override_file(tmpdir):
    path = tmpdir.join('run.yaml')
    path.write('ways: 3\nepisodes: 10\n')
    args = _args(['--episodes', '20', '--compare', 'ra,co', '--knn-k', '3'])
    cfg = resolve_config(str(path), args)
    assert cfg.ways == 3
    assert cfg.episodes == 20
    assert cfg.compare == ('ra', 'co')
    assert cfg.knn_k == 3


def test_resolve_without_file():
    cfg = resolve_config(None, _args(['--input', 'x/y.icif']))
    assert cfg == RunConfig(input='x/y.icif')


def test_load_config_missing_file(tmpdir):
    path = str(tmpdir.join('nope.yaml'))
    with pytest.raises(ConfigError) as excinfo:
        load_config(path)
    assert str(excinfo.value) == f'{path}: No such file or directory'


def test_derived_configs():
    cfg = RunConfig(ways=3, shots=2, queries=4, selection='co', seed=9)
    assert episode_spec(cfg) == EpisodeSpec(3, 2, 4, 0, 'transductive')
    loop = loop_config(cfg)
    assert loop.selection == 'co'
    assert loop.seed == 9
    assert loop_config(cfg, 'ra').selection == 'ra'
