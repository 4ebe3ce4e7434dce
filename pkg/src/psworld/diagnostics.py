"""Source spans, diagnostics and the exception hierarchy."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable


class Severity(str, Enum):
    ERROR = "error"
    WARN = "warn"


@dataclass(frozen=True)
class SourceSpan:
    """Location in source text for error reporting."""

    file: str
    line: int  # 1-based
    column: int  # 1-based
    length: int = 1

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    rule: str
    message: str
    span: SourceSpan | None = None
    paper_rule: str | None = None
    location: str | None = None  # model element, e.g. "entity clock"

    def render(self) -> str:
        where = str(self.span) if self.span else (self.location or "<model>")
        tag = f" [{self.paper_rule}]" if self.paper_rule else ""
        return f"{where}: {self.severity.value}: {self.rule}: {self.message}{tag}"

    def to_dict(self) -> dict:
        d = {
            "severity": self.severity.value,
            "rule": self.rule,
            "message": self.message,
            "paper_rule": self.paper_rule,
            "location": self.location,
            "span": None,
        }
        if self.span is not None:
            d["span"] = {
                "file": self.span.file,
                "line": self.span.line,
                "column": self.span.column,
                "length": self.span.length,
            }
        return d


def has_errors(diagnostics: Iterable[Diagnostic]) -> bool:
    return any(d.severity is Severity.ERROR for d in diagnostics)


class PsworldError(Exception):
    """Base class for engine errors. ``rule`` is a stable token."""

    rule = "error"

    def __init__(self, message: str, *, rule: str | None = None) -> None:
        if rule is not None:
            self.rule = rule
        super().__init__(message)


class ModelSyntaxError(PsworldError):
    """The source text could not be turned into a model."""

    rule = "syntax-error"

    def __init__(self, diagnostics: list[Diagnostic]) -> None:
        self.diagnostics = diagnostics
        first = diagnostics[0].render() if diagnostics else "no diagnostics"
        more = f" (+{len(diagnostics) - 1} more)" if len(diagnostics) > 1 else ""
        super().__init__(first + more)


class ModelIntegrityError(PsworldError):
    """A reference does not resolve, or an id is unknown."""

    rule = "unresolved-reference"


class UnknownIdError(ModelIntegrityError):
    def __init__(self, namespace: str, ident: str) -> None:
        self.namespace = namespace
        self.ident = ident
        super().__init__(f"unknown {namespace} {ident!r}", rule=f"unknown-{namespace}")


class ActivationError(PsworldError):
    rule = "activation-error"


class NotActiveError(PsworldError):
    rule = "not-active"


class UngroundedOutcomeError(PsworldError):
    rule = "ungrounded-outcome"


class SearchTooLargeError(PsworldError):
    rule = "search-too-large"


class NotRemovableError(PsworldError):
    """Reduction refused. ``counterexample`` is (outcome, context, before, after)."""

    rule = "not-removable"

    def __init__(
        self,
        message: str,
        *,
        counterexample: tuple[str, str, bool | None, bool | None] | None = None,
        uncertified: frozenset[str] = frozenset(),
    ) -> None:
        self.counterexample = counterexample
        self.uncertified = uncertified
        super().__init__(message)


class RescopeError(PsworldError):
    rule = "invalid-rescope"


class InsufficientModelError(PsworldError):
    rule = "insufficient-model"
