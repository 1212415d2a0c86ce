"""Source diagnostics shared by the parser and the type checker."""

from __future__ import annotations

from dataclasses import dataclass

from pie.dsl.ast import Span
from pie.errors import PieError


def line_col(source: str, offset: int) -> tuple[int, int]:
    """1-based line and column of ``offset``."""
    offset = max(0, min(offset, len(source)))
    line = source.count("\n", 0, offset) + 1
    col = offset - (source.rfind("\n", 0, offset) + 1) + 1
    return line, col


@dataclass(frozen=True)
class Diagnostic:
    origin: str
    span: Span
    message: str

    def render(self, source: str) -> str:
        line, col = line_col(source, self.span.start)
        return f"{self.origin}:{line}:{col}: error: {self.message}"


class DiagnosticError(PieError):
    """One or more syntax or type errors."""

    def __init__(self, diagnostics: list[Diagnostic], source: str = ""):
        self.diagnostics = list(diagnostics)
        self.source = source
        super().__init__("\n".join(self.render()))

    def render(self) -> list[str]:
        return [d.render(self.source) for d in self.diagnostics]
