"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`HomophilyError`, and each subclass carries a short ``category``
string that the command line maps to an exit code.
"""

from __future__ import annotations


class HomophilyError(Exception):
    category = "error"
    exit_code = 1


class ParseError(HomophilyError):
    """A record in an input file could not be parsed."""

    category = "parse"
    exit_code = 3

    def __init__(self, message: str, *, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.path = path
        self.line = line


class ValidationError(HomophilyError):
    category = "validation"
    exit_code = 4


class ConfigurationError(HomophilyError):
    category = "configuration"
    exit_code = 2


class ConsistencyError(HomophilyError):
    category = "consistency"
    exit_code = 5


class DataError(HomophilyError):
    category = "data"
    exit_code = 5


class UndefinedRoleError(DataError):
    """A role or distribution is undefined because the user never posted."""


class DomainError(HomophilyError):
    category = "domain"
    exit_code = 5


class DimensionError(HomophilyError):
    category = "dimension"
    exit_code = 5


class AlignmentError(HomophilyError):
    category = "alignment"
    exit_code = 5


class DegenerateSeriesError(DataError):
    pass


class ModelError(HomophilyError):
    category = "model"
    exit_code = 6


class GenerationError(HomophilyError):
    category = "generation"
    exit_code = 6
