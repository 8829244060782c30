"""Diagnostics emitted while checking and running a script."""

from __future__ import annotations

import enum
from dataclasses import dataclass

# Message shapes for these three follow the grunt console.
INVALID_FIELD = 1025
UNDEFINED_ALIAS = 1200
NO_OPERATOR = 1003
IMPLICIT_CAST = 0
# Local codes, not emulating any real system.
SYNTAX_ERROR = 4000
TYPE_MISMATCH = 4001
COERCION_FAILED = 4002
INPUT_ERROR = 4003


class Severity(str, enum.Enum):
    ERROR = "ERROR"
    WARNING = "WARNING"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: int
    message: str
    location: tuple[int, int] | None = None
    count: int = 1

    def format(self) -> str:
        if self.severity is Severity.WARNING:
            return f"WARN Encountered Warning {self.message} {self.count} time(s)."
        where = f"<line {self.location[0]}, column {self.location[1]}> " if self.location else ""
        return f"ERROR {self.code}: {where}{self.message}"

    def __str__(self) -> str:
        return self.format()


def error(code: int, message: str, location: tuple[int, int] | None = None) -> Diagnostic:
    return Diagnostic(Severity.ERROR, code, message, location)
