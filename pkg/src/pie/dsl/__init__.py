"""Frontend for the PIE pipeline language."""

from pie.dsl.diagnostics import Diagnostic, DiagnosticError
from pie.dsl.parser import parse_expression, parse_program
from pie.dsl.printer import pretty_print

__all__ = ["Diagnostic", "DiagnosticError", "parse_expression", "parse_program", "pretty_print"]
