"""Diagnostic records and the stable code catalog."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .nodes import Span

ERROR = "error"
WARNING = "warning"
INFO = "info"

SEVERITY_ORDER = {ERROR: 0, WARNING: 1, INFO: 2}

# code -> (default severity, short title)
CATALOG: dict[str, tuple[str, str]] = {
    "PP001": (ERROR, "syntax error"),
    "PP101": (ERROR, "unresolved signal"),
    "PP102": (ERROR, "duplicate declaration"),
    "PP103": (ERROR, "signal type mismatch"),
    "PP104": (ERROR, "unresolved policy reference"),
    "PP105": (INFO, "dependent passes skipped"),
    "PP106": (ERROR, "invalid signal configuration"),
    "PP201": (WARNING, "category overlap"),
    "PP202": (INFO, "duplicate category entry"),
    "PP301": (WARNING, "missing NOT guard"),
    "PP401": (ERROR, "unknown group member"),
    "PP402": (ERROR, "group members share a category"),
    "PP403": (ERROR, "missing or unknown group default"),
    "PP404": (ERROR, "non-positive group temperature"),
    "PP405": (WARNING, "group threshold at or below 1/k"),
    "PP406": (WARNING, "group centroids nearly coincide"),
    "PP407": (WARNING, "group threshold below 1/2"),
    "PP408": (ERROR, "crisp signal in softmax group"),
    "PP409": (ERROR, "signal in several groups"),
    "PP501": (ERROR, "unknown expected route"),
    "PP502": (ERROR, "empty test query"),
    "PP601": (ERROR, "mixed tiered and untiered routes"),
    "PP602": (INFO, "tier structure"),
    "PP701": (ERROR, "decision tree without ELSE"),
    "PP702": (ERROR, "unreachable decision-tree branch"),
    "PP801": (ERROR, "cannot certify disjointness"),
    "PP802": (ERROR, "recursive policy reference"),
    "PP901": (WARNING, "analysis incomplete"),
}


@dataclass(frozen=True)
class Fix:
    span: Span
    replacement: str

    def to_json(self) -> dict[str, Any]:
        return {
            "line": self.span.line,
            "column": self.span.column,
            "offset": self.span.offset,
            "length": self.span.length,
            "replacement": self.replacement,
        }


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    span: Span
    message: str
    fix: Fix | None = None

    def __post_init__(self) -> None:
        if self.code not in CATALOG:
            raise ValueError(f"unknown diagnostic code {self.code}")
        if not self.message:
            raise ValueError("diagnostic message must be non-empty")

    def format(self) -> str:
        s = self.span
        return f"{s.file}:{s.line}:{s.column}: {self.severity}[{self.code}]: {self.message}"

    def to_json(self) -> dict[str, Any]:
        return {
            "severity": self.severity,
            "code": self.code,
            "file": self.span.file,
            "line": self.span.line,
            "column": self.span.column,
            "message": self.message,
            "fix": self.fix.to_json() if self.fix else None,
        }


def diag(code: str, span: Span, message: str, fix: Fix | None = None,
         severity: str | None = None) -> Diagnostic:
    return Diagnostic(severity or CATALOG[code][0], code, span, message, fix)


def has_errors(diags: list[Diagnostic]) -> bool:
    return any(d.severity == ERROR for d in diags)


class ParseError(Exception):
    """Raised by the parser; carries the PP001 diagnostic."""

    def __init__(self, diagnostic: Diagnostic):
        super().__init__(diagnostic.format())
        self.diagnostic = diagnostic

    @property
    def diagnostics(self) -> list[Diagnostic]:
        return [self.diagnostic]


def apply_fixes(source: str, fixes: list[Fix]) -> str:
    """Apply non-overlapping text edits (byte offsets); later overlapping edits are dropped."""
    data = source.encode("utf-8")
    chosen: list[Fix] = []
    for f in sorted(fixes, key=lambda f: (f.span.offset, f.span.length)):
        if chosen and f.span.offset < chosen[-1].span.end:
            continue
        chosen.append(f)
    for f in reversed(chosen):
        data = data[: f.span.offset] + f.replacement.encode("utf-8") + data[f.span.end:]
    return data.decode("utf-8")
