import pytest

from icinfer import _tokenize
from icinfer._error import ParseError
from icinfer._tokenize import dump_scalar
from icinfer._tokenize import tokenize


def _assert_tokenize_error(src, s):
    with pytest.raises(ParseError) as excinfo:
        tokenize(src)
    assert str(excinfo.value) == s


def test_tokenize_error_unexpected_token():
    _assert_tokenize_error(
        '&',
        'Unexpected token\n\n'
        'Line 1, column 1\n\n'
        'Line|Source\n'
        '----|------------------------------------------------------\n'
        '1   |&\n'
        '     ^\n',
    )


def test_tokenize_error_unquoted_path():
    with pytest.raises(ParseError) as excinfo:
        tokenize('input: data.csv\n')
    assert excinfo.value.offset == 11


def test_tokenize_entry():
    assert tokenize('ways: 5  # five\n') == (
        _tokenize.BareWord('ways', 'ways'),
        _tokenize.Colon(':'),
        _tokenize.Space(' '),
        _tokenize.Int(5, '5'),
        _tokenize.Space('  '),
        _tokenize.Comment('# five'),
        _tokenize.NL('\n'),
        _tokenize.EOF(''),
    )


def test_bare_word_starts_with_other_token():
    tokens = tokenize('true_cap: null_value')
    assert tokens[0] == _tokenize.BareWord('true_cap', 'true_cap')
    assert tokens[3] == _tokenize.BareWord('null_value', 'null_value')


def test_bare_word_with_dash():
    tokens = tokenize('semi-supervised')
    assert tokens == (
        _tokenize.BareWord('semi-supervised', 'semi-supervised'),
        _tokenize.EOF(''),
    )


@pytest.mark.parametrize(
    ('src', 'expected'),
    (
        ('true', _tokenize.Bool(True, 'true')),
        ('false', _tokenize.Bool(False, 'false')),
        ('null', _tokenize.Null(None, 'null')),
        ('0x1f', _tokenize.Int(31, '0x1f')),
        ('0b101', _tokenize.Int(5, '0b101')),
        ('0o17', _tokenize.Int(15, '0o17')),
        ('-12', _tokenize.Int(-12, '-12')),
        ('1e-3', _tokenize.Float(1e-3, '1e-3')),
        ('.5', _tokenize.Float(.5, '.5')),
        ('2.', _tokenize.Float(2., '2.')),
        ("'a b'", _tokenize.String('a b', "'a b'")),
        (r'"it\"s"', _tokenize.String('it"s', r'"it\"s"')),
    ),
)
def test_tokenize_scalars(src, expected):
    assert tokenize(src) == (expected, _tokenize.EOF(''))


@pytest.mark.parametrize(
    ('val', 'expected'),
    (
        (None, 'null'),
        (True, 'true'),
        (False, 'false'),
        (5, '5'),
        (0.001, '0.001'),
        ('group_l2', 'group_l2'),
        ('semi-supervised', 'semi-supervised'),
        ('null', "'null'"),
        ('data/x.icif', "'data/x.icif'"),
    ),
)
def test_dump_scalar(val, expected):
    assert dump_scalar(val) == expected
    (token, _) = tokenize(expected)
    assert token.val == val
