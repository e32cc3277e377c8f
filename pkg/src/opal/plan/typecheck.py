"""Static kind checking for parsed plans.

Checks, against the registered tool signatures and a database schema:
argument names and arity, argument kinds, ``table_name`` literals, binding
discipline (single assignment, no unbound references), loop iterables, and
the emit rule — DI/PR/AC proposals appear exactly under ``emit``.

Values whose kind cannot be known statically (tool outputs, loop variables,
record field reads) are ``unknown`` and compatible with everything; the
executor re-checks those at runtime.
"""

from __future__ import annotations

from opal.db import Database
from opal.tools.signatures import SIGNATURES, TERMINAL_TOOLS

from .ast import (
    Comment,
    Diagnostic,
    Emit,
    Expr,
    FieldAccess,
    ForEach,
    Let,
    ListExpr,
    Literal,
    PlanProgram,
    RecordExpr,
    Severity,
    Span,
    ToolCall,
    VarRef,
)

# Names every plan may use without binding them. The executor provides the
# same three values.
INITIAL_BINDINGS: dict[str, str] = {
    "database": "database",
    "documents": "list",
    "instruction": "text",
}

_FALLBACK_SPAN = Span(1, 1, 1)


def _kind_of_literal(value: str | int | float) -> str:
    if isinstance(value, bool):
        return "unknown"
    if isinstance(value, str):
        return "text"
    if isinstance(value, int):
        return "integer"
    return "real"


def _compatible(actual: str, expected: str) -> bool:
    return actual == "unknown" or expected == "unknown" or actual == expected


class _Checker:
    def __init__(self, db: Database) -> None:
        self.db = db
        self.diagnostics: list[Diagnostic] = []
        self.scopes: list[dict[str, str]] = [dict(INITIAL_BINDINGS)]
        # name -> defining RecordExpr, for bindings whose shape is static.
        self.record_shapes: list[dict[str, RecordExpr]] = [{}]

    def error(self, code: str, message: str, span: Span | None) -> None:
        self.diagnostics.append(
            Diagnostic(Severity.ERROR, code, message, span or _FALLBACK_SPAN)
        )

    def lookup(self, name: str) -> str | None:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        return None

    def _shape_of(self, expr: Expr) -> RecordExpr | None:
        """The record literal an expression statically denotes, if any."""
        if isinstance(expr, RecordExpr):
            return expr
        if isinstance(expr, VarRef):
            for scope, shapes in zip(reversed(self.scopes), reversed(self.record_shapes)):
                if expr.name in scope:
                    return shapes.get(expr.name)
        if isinstance(expr, FieldAccess):
            base = self._shape_of(expr.base)
            if base is not None:
                for key, value in base.fields:
                    if key == expr.key:
                        return self._shape_of(value)
        return None

    # -- statements -----------------------------------------------------

    def check_program(self, program: PlanProgram) -> None:
        for stmt in program.statements:
            self.check_statement(stmt)

    def check_statement(self, stmt) -> None:
        if isinstance(stmt, Comment):
            return
        if isinstance(stmt, Let):
            kind = self.check_expr(stmt.value)
            if stmt.name in self.scopes[-1]:
                self.error(
                    "duplicate-binding",
                    f"{stmt.name!r} is already bound in this scope",
                    stmt.span,
                )
            else:
                self.scopes[-1][stmt.name] = kind
                shape = self._shape_of(stmt.value)
                if shape is not None:
                    self.record_shapes[-1][stmt.name] = shape
            return
        if isinstance(stmt, ForEach):
            kind = self.check_expr(stmt.iterable)
            if kind not in ("list", "unknown"):
                self.error(
                    "foreach-over-non-list",
                    f"for iterates a list, found {kind}",
                    stmt.span,
                )
            self.scopes.append({stmt.var: self._element_kind(stmt.iterable)})
            self.record_shapes.append({})
            for inner in stmt.body:
                self.check_statement(inner)
            self.scopes.pop()
            self.record_shapes.pop()
            return
        if isinstance(stmt, Emit):
            self.check_expr(stmt.call, emit_position=True)
            if stmt.call.tool in SIGNATURES and stmt.call.tool not in TERMINAL_TOOLS:
                self.error(
                    "emit-target",
                    f"emit takes DI, PR, or AC; {stmt.call.tool} does not propose updates",
                    stmt.span,
                )
            return
        self.error("unknown-statement", f"unsupported statement {type(stmt).__name__}", None)

    def _element_kind(self, iterable: Expr) -> str:
        if isinstance(iterable, ListExpr) and iterable.items:
            kinds = {self._static_kind(item) for item in iterable.items}
            if len(kinds) == 1:
                return kinds.pop()
        return "unknown"

    def _static_kind(self, expr: Expr) -> str:
        """Kind of an already-checked expression, with no new diagnostics."""
        if isinstance(expr, Literal):
            return _kind_of_literal(expr.value)
        if isinstance(expr, ListExpr):
            return "list"
        if isinstance(expr, RecordExpr):
            return "record"
        if isinstance(expr, VarRef):
            return self.lookup(expr.name) or "unknown"
        if isinstance(expr, ToolCall):
            sig = SIGNATURES.get(expr.tool)
            return sig.returns if sig else "unknown"
        return "unknown"

    # -- expressions ----------------------------------------------------

    def check_expr(self, expr: Expr, emit_position: bool = False) -> str:
        if isinstance(expr, Literal):
            return _kind_of_literal(expr.value)
        if isinstance(expr, ListExpr):
            for item in expr.items:
                self.check_expr(item)
            return "list"
        if isinstance(expr, RecordExpr):
            seen: set[str] = set()
            for key, value in expr.fields:
                if key in seen:
                    self.error(
                        "duplicate-record-key", f"record key {key!r} repeats", expr.span
                    )
                seen.add(key)
                self.check_expr(value)
            return "record"
        if isinstance(expr, VarRef):
            kind = self.lookup(expr.name)
            if kind is None:
                self.error("unbound-name", f"{expr.name!r} is not bound", expr.span)
                return "unknown"
            return kind
        if isinstance(expr, FieldAccess):
            base_kind = self.check_expr(expr.base)
            if base_kind not in ("record", "unknown"):
                self.error(
                    "field-access-on-non-record",
                    f"cannot read field {expr.key!r} of a {base_kind} value",
                    expr.span,
                )
                return "unknown"
            shape = self._shape_of(expr.base)
            if shape is not None:
                for key, value in shape.fields:
                    if key == expr.key:
                        return self._static_kind(value)
                self.error(
                    "unknown-field",
                    f"record has no field {expr.key!r} (has: {', '.join(shape.keys())})",
                    expr.span,
                )
            return "unknown"
        if isinstance(expr, ToolCall):
            return self.check_call(expr, emit_position)
        self.error("unknown-expression", f"unsupported node {type(expr).__name__}", None)
        return "unknown"

    def check_call(self, call: ToolCall, emit_position: bool) -> str:
        sig = SIGNATURES.get(call.tool)
        if sig is None:
            self.error(
                "unknown-tool",
                f"{call.tool!r} is not a registered tool",
                call.span,
            )
            for _, value in call.args:
                self.check_expr(value)
            return "unknown"
        if call.tool in TERMINAL_TOOLS and not emit_position:
            self.error(
                "terminal-op-outside-emit",
                f"{call.tool} proposes a database update and must appear as 'emit {call.tool}(...)'",
                call.span,
            )
        seen: set[str] = set()
        for name, value in call.args:
            if name in seen:
                self.error(
                    "duplicate-argument",
                    f"argument {name!r} given twice in call to {call.tool}",
                    call.span,
                )
                continue
            seen.add(name)
            actual = self.check_expr(value)
            expected = sig.param_kind(name)
            if expected is None:
                self.error(
                    "unexpected-argument",
                    f"{call.tool} has no parameter {name!r} "
                    f"(takes: {', '.join(sig.param_names())})",
                    call.span,
                )
                continue
            if not _compatible(actual, expected):
                self.error(
                    "kind-mismatch",
                    f"{call.tool} argument {name!r}: expected {expected}, found {actual}",
                    value.span or call.span,
                )
            if name == "table_name" and isinstance(value, Literal) and isinstance(value.value, str):
                if not self.db.has_table(value.value):
                    known = ", ".join(t.name for t in self.db.tables) or "none"
                    self.error(
                        "unknown-table",
                        f"database has no table {value.value!r} (tables: {known})",
                        value.span or call.span,
                    )
        for name, _ in sig.params:
            if name not in seen:
                self.error(
                    "missing-argument",
                    f"call to {call.tool} is missing argument {name!r}",
                    call.span,
                )
        return sig.returns


def typecheck(program: PlanProgram, db: Database) -> list[Diagnostic]:
    """All static findings for a parsed plan against a database schema."""
    checker = _Checker(db)
    checker.check_program(program)
    return checker.diagnostics
