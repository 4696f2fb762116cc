"""Exception hierarchy shared by the library and the CLI.

The CLI maps each family onto a process exit code, so library code raises
the most specific class it can.
"""

from __future__ import annotations


class LeocdError(Exception):
    """Base class. ``stage`` is filled in by the pipeline driver."""

    exit_code = 1

    def __init__(self, message: str, *, stage: str | None = None):
        super().__init__(message)
        self.stage = stage

    def __str__(self) -> str:
        msg = super().__str__()
        return f"[{self.stage}] {msg}" if self.stage else msg


class ConfigError(LeocdError, ValueError):
    exit_code = 2


class DataError(LeocdError, ValueError):
    exit_code = 3


class LinkOutageError(LeocdError):
    """No MODCOD in the table can be decoded at the given SNR."""

    exit_code = 4

    def __init__(self, message: str, *, gamma_db: float | None = None, stage: str | None = None):
        super().__init__(message, stage=stage)
        self.gamma_db = gamma_db
