"""Diagnostics shared by every stage of the translator."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class Diagnostic:
    line: int
    col: int
    code: str
    severity: str
    message: str

    @property
    def location(self):
        return (self.line, self.col)

    def format(self, filename="<input>"):
        return f"{filename}:{self.line}:{self.col}: {self.severity} {self.code}: {self.message}"

    @property
    def is_error(self):
        return self.severity == "error"


def error(code, message, location):
    line, col = location
    return Diagnostic(line, col, code, "error", message)


def warning(code, message, location):
    line, col = location
    return Diagnostic(line, col, code, "warning", message)


class AccError(Exception):
    """Raised when a stage cannot continue; carries one or more diagnostics."""

    def __init__(self, diagnostics):
        if isinstance(diagnostics, Diagnostic):
            diagnostics = [diagnostics]
        self.diagnostics = sorted(diagnostics)
        super().__init__("; ".join(d.format() for d in self.diagnostics))

    @property
    def codes(self):
        return [d.code for d in self.diagnostics]


def fail(code, message, location=(1, 1)):
    raise AccError(error(code, message, location))
