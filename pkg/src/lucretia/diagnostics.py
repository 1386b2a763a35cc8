"""Source spans, structured diagnostics and the exceptions that carry them."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

# Closed list of diagnostic codes. Anything emitted by the package is drawn from here.
CODES: dict[str, str] = {
    # core-lang validation
    "E-DUPLICATE-PARAMETER": "function literal binds the same parameter twice",
    "E-LOCATION-IN-SOURCE": "heap location found in a source program",
    "E-BAD-IDENTIFIER": "identifier is malformed or reserved",
    "E-UNANNOTATED-FUNCTION": "function literal carries no contract",
    "E-NOT-ATOM": "non-atomic expression in an atom position",
    # parser
    "E-SYNTAX": "syntax error",
    "E-CONTRACT-SYNTAX": "malformed contract annotation",
    # checker
    "E-UNBOUND": "unknown variable",
    "E-NON-OBJECT": "receiver is not an object",
    "E-UNKNOWN-OBJECT": "object has no constraint in the current precondition",
    "E-RACC-MAYBE": "field is possibly absent",
    "E-RACC-ABSENT": "field is definitely absent",
    "E-RACC-UNKNOWN": "field is not known to be present",
    "E-OP-TYPE": "operator applied to operands of the wrong type",
    "E-COND-TYPE": "condition is not a boolean",
    "E-JOIN": "branch postconditions cannot be joined",
    "E-IFHAS-FIELD": "ifhasattr on a field the precondition does not mention",
    "E-NOT-FUNCTION": "callee is not a function",
    "E-FAPP": "no contract of the callee applies",
    "E-CONTRACT": "function body violates its contract",
    "E-GENERALIZATION": "contract quantifies the wrong set of type variables",
    "E-ARITY": "parameter count differs from the contract",
    # interpreter
    "R-MESSAGE-NOT-UNDERSTOOD": "field is absent from the object",
    "R-TYPE-MISMATCH": "value of the wrong kind",
    "R-PRIMOP": "primitive operation undefined on its operands",
    "R-UNBOUND": "unbound variable reached evaluation",
    "R-FUEL": "step budget exhausted",
    # cli
    "U-USAGE": "bad command line",
    "U-IO": "cannot read input",
    "F-VIOLATION": "checker-accepted program went wrong at runtime",
}


@dataclass(frozen=True)
class SourceSpan:
    """Byte offsets plus 1-based line/column of both ends."""

    start: int
    end: int
    line: int
    column: int
    end_line: int
    end_column: int

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"span start {self.start} after end {self.end}")

    def slice(self, src: str) -> str:
        return src.encode("utf-8")[self.start:self.end].decode("utf-8", errors="replace")

    def to_json(self) -> dict[str, int]:
        return {
            "start": self.start,
            "end": self.end,
            "line": self.line,
            "column": self.column,
            "end_line": self.end_line,
            "end_column": self.end_column,
        }

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    span: Optional[SourceSpan] = None
    rule: Optional[str] = None
    expected: Optional[str] = None
    actual: Optional[str] = None
    severity: str = "error"
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.code not in CODES:
            raise ValueError(f"unknown diagnostic code {self.code!r}")
        if self.severity not in ("error", "warning"):
            raise ValueError(f"bad severity {self.severity!r}")

    def to_json(self) -> dict[str, Any]:
        return {
            "severity": self.severity,
            "code": self.code,
            "message": self.message,
            "span": self.span.to_json() if self.span else None,
            "rule": self.rule,
            "expected": self.expected,
            "actual": self.actual,
            "notes": list(self.notes),
        }

    def render(self, filename: str = "<input>") -> str:
        where = f"{filename}:{self.span}" if self.span else filename
        text = f"{where}: {self.severity} [{self.code}] {self.message}"
        if self.rule:
            text += f" (rule {self.rule})"
        if self.expected is not None:
            text += f"\n  expected: {self.expected}"
        if self.actual is not None:
            text += f"\n  actual:   {self.actual}"
        for note in self.notes:
            text += f"\n  note: {note}"
        return text


class LucretiaError(Exception):
    """Base class; every instance carries at least one diagnostic."""

    def __init__(self, diagnostics: list[Diagnostic] | Diagnostic):
        if isinstance(diagnostics, Diagnostic):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(d.message for d in self.diagnostics))

    @property
    def code(self) -> str:
        return self.diagnostics[0].code


class ParseError(LucretiaError):
    pass


class CheckError(LucretiaError):
    pass
