"""
Exception hierarchy of dtwindex. The command line maps the top-level classes on exit codes:
UsageError -> 1, DataError -> 2, InvariantError -> 3.
"""


class DtwIndexError(Exception):
    pass


class UsageError(DtwIndexError, ValueError):
    pass


class InvalidPathError(UsageError):
    pass


class DataError(DtwIndexError):
    pass


class InvalidSeriesError(DataError, ValueError):
    pass


class UcrParseError(DataError):

    def __init__(self, path, line, column, token, reason='not a number'):
        self.path = path
        self.line = line
        self.column = column
        self.token = token
        super().__init__(f'{path}: line {line}, column {column}: {reason}: {token!r}')


class IndexFileError(DataError):
    pass


class IndexVersionError(IndexFileError):
    pass


class IndexChecksumError(IndexFileError):
    pass


class IndexTruncatedError(IndexFileError):
    pass


class InvariantError(DtwIndexError):
    pass
