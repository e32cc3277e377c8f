"""AST node types for the plan DSL.

Nodes are frozen dataclasses. Source spans are carried for diagnostics but
excluded from equality, so a parsed program compares equal to one built
programmatically (and to its own reformatted reparse).

Statement forms: ``Let``, ``ForEach``, ``Comment``, ``Emit``.
Expression forms: ``Literal``, ``ListExpr``, ``RecordExpr``, ``VarRef``,
``FieldAccess``, ``ToolCall``.
"""

from __future__ import annotations

import enum
from collections.abc import Iterator
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Span:
    """Location of a construct in plan source: 1-based line and column."""

    line: int
    column: int
    length: int = 1


class Severity(enum.Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    """One parser or checker finding, anchored to a source span."""

    severity: Severity
    code: str
    message: str
    span: Span

    def render(self) -> str:
        return (
            f"{self.severity.value} [{self.code}] "
            f"line {self.span.line}, col {self.span.column}: {self.message}"
        )


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    """A text, integer, or real constant."""

    value: str | int | float
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ListExpr:
    items: tuple[Expr, ...]
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class RecordExpr:
    """A record literal with ordered string keys."""

    fields: tuple[tuple[str, Expr], ...]
    span: Span | None = field(default=None, compare=False)

    def keys(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.fields)


@dataclass(frozen=True)
class VarRef:
    name: str
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class FieldAccess:
    """``base.key`` — key must be identifier-shaped to have surface syntax."""

    base: Expr
    key: str
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ToolCall:
    """A named-argument call to a registered tool: ``NER(text=doc, type="Movie")``."""

    tool: str
    args: tuple[tuple[str, Expr], ...]
    span: Span | None = field(default=None, compare=False)

    def arg(self, name: str) -> Expr | None:
        for key, value in self.args:
            if key == name:
                return value
        return None

    def arg_names(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.args)


Expr = Literal | ListExpr | RecordExpr | VarRef | FieldAccess | ToolCall


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Comment:
    """A natural-language thought; first-class so it survives round-trips."""

    text: str
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Let:
    name: str
    value: Expr
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ForEach:
    var: str
    iterable: Expr
    body: tuple[Statement, ...]
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Emit:
    """Surface a database-operation proposal; the call must be DI, PR, or AC."""

    call: ToolCall
    span: Span | None = field(default=None, compare=False)


Statement = Comment | Let | ForEach | Emit


@dataclass(frozen=True)
class PlanProgram:
    statements: tuple[Statement, ...] = ()


def walk_statements(program: PlanProgram) -> Iterator[Statement]:
    """Every statement in program order, descending into loop bodies."""

    def _walk(stmts: tuple[Statement, ...]) -> Iterator[Statement]:
        for stmt in stmts:
            yield stmt
            if isinstance(stmt, ForEach):
                yield from _walk(stmt.body)

    return _walk(program.statements)
