"""The sandboxed plan DSL: AST, parser, formatter, and kind checker."""

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
    Statement,
    ToolCall,
    VarRef,
    walk_statements,
)
from .formatter import format_plan
from .parser import ParseResult, parse
from .typecheck import INITIAL_BINDINGS, typecheck

__all__ = [
    "Comment",
    "Diagnostic",
    "Emit",
    "Expr",
    "FieldAccess",
    "ForEach",
    "INITIAL_BINDINGS",
    "Let",
    "ListExpr",
    "Literal",
    "ParseResult",
    "PlanProgram",
    "RecordExpr",
    "Severity",
    "Span",
    "Statement",
    "ToolCall",
    "VarRef",
    "format_plan",
    "parse",
    "typecheck",
    "walk_statements",
]
