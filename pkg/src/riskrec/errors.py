"""Exception types shared across the pipeline stages."""

from __future__ import annotations


class InputError(Exception):
    """A file or row the pipeline consumes is missing or malformed (CLI exit 1)."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None) -> None:
        self.path = path
        self.line = line
        context = ""
        if path is not None:
            context = f"{path}: "
            if line is not None:
                context = f"{path}:{line}: "
        super().__init__(context + message)


class ParseError(InputError):
    """A session-log line does not match the expected grammar."""


class InvariantError(RuntimeError):
    """An internal consistency check failed (CLI exit 2)."""
