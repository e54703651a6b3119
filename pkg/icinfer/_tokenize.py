import ast
import collections
import re

from icinfer._error import ParseError


def _or(*args):
    return '({})'.format('|'.join(args))


def _nor(*args):
    return ''.join(f'(?<!{arg})' for arg in args)


_token = collections.namedtuple

Bool = _token('Bool', ('val', 'src'))
Null = _token('Null', ('val', 'src'))
Int = _token('Int', ('val', 'src'))
Float = _token('Float', ('val', 'src'))
String = _token('String', ('val', 'src'))
BareWord = _token('BareWord', ('val', 'src'))

ListStart = _token('ListStart', ('src',))
ListEnd = _token('ListEnd', ('src',))
Colon = _token('Colon', ('src',))
Comma = _token('Comma', ('src',))
Comment = _token('Comment', ('src',))
NL = _token('NL', ('src',))
Space = _token('Space', ('src',))
EOF = _token('EOF', ('src',))

SCALARS = (Bool, Null, Int, Float, String, BareWord)

COLON_RE = re.compile(':')
COMMA_RE = re.compile(',')
COMMENT_RE = re.compile('# .*')
NL_RE = re.compile('\n')
SPACE_RE = re.compile(' +')

BOOL_TOKENS = ('true', 'false')
BOOL_RE = re.compile(_or(*BOOL_TOKENS) + '(?![A-Za-z0-9_-])')
NULL_RE = re.compile('null(?![A-Za-z0-9_-])')
_exp = '([eE][-+]?[0-9]+)'
FLOAT_RE = re.compile('-?' + _or(
    '[0-9]+' + _exp,
    r'[0-9]+\.[0-9]*{}?'.format(_exp),
    r'\.[0-9]+{}?'.format(_exp),
))
INT_RE = re.compile('-?' + _or(
    '0x[0-9a-fA-F]+', '0b[0-1]+', '0o[0-7]+', '0', '[1-9][0-9]*',
) + '(?![0-9A-Za-z_.])')
STRING_RE = re.compile(_or(
    r"'[^\n'\\]*(?:\\.[^\n'\\]*)*'", r'"[^\n"\\]*(?:\\.[^\n"\\]*)*"',
))
BARE_WORD_RE = re.compile(
    '[A-Za-z_][A-Za-z0-9_-]*' +
    # Followed by some non-identifier
    '(?![A-Za-z0-9_-])' +
    # But not our bool / null tokens
    _nor(*BOOL_TOKENS) + _nor('null'),
)
BARE_WORD_FULL_MATCH_RE = re.compile(BARE_WORD_RE.pattern + '$')

LIST_START_RE = re.compile(r'\[')
LIST_END_RE = re.compile(']')


def parse_bool(s):
    return s == 'true'


def parse_null(_):
    return None


def _reg_parse(reg, cls, src, offset):
    match = reg.match(src, offset)
    return cls(match.group()), match.end()


def _reg_parse_val(reg, cls, to_val_func, src, offset):
    match = reg.match(src, offset)
    val = to_val_func(match.group())
    return cls(val, match.group()), match.end()


tokenize_processors = (
    (BARE_WORD_RE, _reg_parse_val, BareWord, str),
    (BOOL_RE, _reg_parse_val, Bool, parse_bool),
    (NULL_RE, _reg_parse_val, Null, parse_null),
    (FLOAT_RE, _reg_parse_val, Float, ast.literal_eval),
    (INT_RE, _reg_parse_val, Int, ast.literal_eval),
    (STRING_RE, _reg_parse_val, String, ast.literal_eval),
    (LIST_START_RE, _reg_parse, ListStart),
    (LIST_END_RE, _reg_parse, ListEnd),
    (COLON_RE, _reg_parse, Colon),
    (COMMA_RE, _reg_parse, Comma),
    (COMMENT_RE, _reg_parse, Comment),
    (NL_RE, _reg_parse, NL),
    (SPACE_RE, _reg_parse, Space),
)


def tokenize(src, offset=0, filename=None):
    srclen = len(src)
    tokens = []
    while offset < srclen:
        for processor in tokenize_processors:
            reg, func = processor[:2]
            args = processor[2:] + (src, offset)
            if reg.match(src, offset):
                token, offset = func(reg, *args)
                tokens.append(token)
                break
        else:
            raise ParseError(src, offset, 'Unexpected token', filename)
    tokens.append(EOF(''))
    return tuple(tokens)


def tokens_to_src_offset(tokens, index):
    """The source text and the offset of `tokens[index]` within it."""
    src = ''.join(token.src for token in tokens)
    offset = sum(len(token.src) for token in tokens[:index])
    return src, offset


def dump_scalar(val):
    """Source text of a value, parsing back to the same value."""
    if val is None:
        return 'null'
    elif isinstance(val, bool):
        return 'true' if val else 'false'
    elif isinstance(val, (int, float)):
        return repr(val)
    elif BARE_WORD_FULL_MATCH_RE.match(val):
        return val
    else:
        return repr(val)
