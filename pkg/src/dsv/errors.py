"""Exception hierarchy.

The CLI maps these onto exit codes: ``ValidationError`` -> 2,
``DegenerateError`` -> 3.
"""

from __future__ import annotations


class DSVError(ValueError):
    """Base class for every error raised by this package."""


class ValidationError(DSVError):
    """Input data is malformed: empty sets, ragged rows, bad labels."""


class DegenerateError(DSVError):
    """A quantity is undefined for the given geometry (zero distance, zero bandwidth)."""


class PreconditionError(ValidationError):
    """A stated hypothesis of an operation does not hold for the input."""


class RunFormatError(ValidationError):
    """A run directory or fixture file could not be parsed.

    ``path`` and ``line`` (1-based, when known) locate the offending input.
    """

    def __init__(self, message: str, path: object = None, line: int | None = None) -> None:
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if self.path is not None:
            where = self.path if line is None else f"{self.path}:{line}"
            where += ": "
        super().__init__(where + message)
