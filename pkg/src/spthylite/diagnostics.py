"""Positioned diagnostics for the theory frontend."""

from __future__ import annotations

from dataclasses import dataclass

# Stable diagnostic codes; tests assert on these.
LEX_ERROR = "LEX_ERROR"
SYNTAX_ERROR = "SYNTAX_ERROR"
DUPLICATE_RULE = "DUPLICATE_RULE"
DUPLICATE_LEMMA = "DUPLICATE_LEMMA"
ARITY_MISMATCH = "ARITY_MISMATCH"
RESERVED_AS_FUNCTION = "RESERVED_AS_FUNCTION"
RESERVED_ARITY = "RESERVED_ARITY"
FACT_KIND_CONFLICT = "FACT_KIND_CONFLICT"
FR_IN_CONCLUSION = "FR_IN_CONCLUSION"
FR_BAD_ARGUMENT = "FR_BAD_ARGUMENT"
IN_IN_CONCLUSION = "IN_IN_CONCLUSION"
OUT_IN_PREMISE = "OUT_IN_PREMISE"
K_IN_RULE = "K_IN_RULE"
RESERVED_IN_ACTION = "RESERVED_IN_ACTION"
UNBOUND_VARIABLE = "UNBOUND_VARIABLE"
BAD_EQUATION = "BAD_EQUATION"
NOT_ON_NONPERSISTENT = "NOT_ON_NONPERSISTENT"
UNDECLARED_SYMBOL = "UNDECLARED_SYMBOL"
UNGUARDED_FORMULA = "UNGUARDED_FORMULA"
UNUSED_ACTION = "UNUSED_ACTION"


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    line: int
    column: int
    hint: str | None = None

    def __str__(self) -> str:
        loc = f"{self.line}:{self.column}"
        base = f"{loc}: {self.severity}[{self.code}]: {self.message}"
        return base + (f" ({self.hint})" if self.hint else "")


def error(code: str, message: str, line: int, column: int, hint: str | None = None) -> Diagnostic:
    return Diagnostic("error", code, message, line, column, hint)


def warning(code: str, message: str, line: int, column: int, hint: str | None = None) -> Diagnostic:
    return Diagnostic("warning", code, message, line, column, hint)
