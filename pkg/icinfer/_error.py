class ParseError(ValueError):
    """A configuration source could not be tokenized or parsed.

    `offset` indexes into `src`; `str()` renders a pointer at the offending
    line and column with two lines of context on either side.
    """

    def __init__(self, src, offset, msg=None, filename=None):
        self.src = src
        self.offset = offset
        self.msg = msg
        self.filename = filename

    def __str__(self):
        if not self.src:
            return self.msg
        src_to = self.src[:self.offset + 1]
        if '\n' not in src_to:
            line = 1
            col = self.offset + 1
        elif src_to.endswith('\n'):
            line = src_to.count('\n')
            col = len(src_to) - src_to[:-1].rfind('\n') - 1
        else:
            line = src_to.count('\n') + 1
            col = len(src_to) - src_to.rfind('\n') - 1

        line_index = line - 1
        lines = self.src.splitlines()
        where = f'{self.filename}: ' if self.filename else ''

        def format_line(index):
            return f'{index + 1: <4}|{lines[index]}\n'

        formatted_lines = ''.join(
            format_line(index)
            for index in range(max(0, line_index - 2), line_index)
        )
        formatted_lines += format_line(line_index)
        formatted_lines += ' ' * (4 + col) + '^\n'
        formatted_lines += ''.join(
            format_line(index)
            for index in range(line_index + 1, min(len(lines), line_index + 3))
        )

        return (
            f'{self.msg or ""}\n\n'
            f'{where}Line {line}, column {col}\n\n'
            f'Line|Source\n'
            f'----|------------------------------------------------------\n'
            f'{formatted_lines}'
        )


class IciError(Exception):
    """Base class of every domain error raised by icinfer."""


class LoadError(IciError):
    """A feature file is malformed.

    Text formats report a 1-based `line`, binary formats a byte `offset`.
    """

    def __init__(self, path, msg, line=None, offset=None):
        super().__init__(path, msg, line, offset)
        self.path = path
        self.msg = msg
        self.line = line
        self.offset = offset

    def __str__(self):
        if self.line is not None:
            return f'{self.path}:{self.line}: {self.msg}'
        elif self.offset is not None:
            return f'{self.path}: byte {self.offset}: {self.msg}'
        else:
            return f'{self.path}: {self.msg}'


class SamplingError(IciError):
    def __init__(self, classes, msg):
        super().__init__(classes, msg)
        self.classes = tuple(classes)
        self.msg = msg

    def __str__(self):
        if not self.classes:
            return self.msg
        return '{} (classes: {})'.format(
            self.msg, ', '.join(str(cls) for cls in self.classes),
        )


class SynthError(IciError):
    pass


class FitError(IciError):
    pass


class RangeError(IciError, ValueError):
    pass


class ParameterError(IciError, ValueError):
    pass


class DimensionError(IciError, ValueError):
    pass


class ConfigError(IciError, ValueError):
    pass
