"""Canonical plan rendering. ``parse(format_plan(p))`` reconstructs ``p``."""

from __future__ import annotations

import json
import math
import re

from .ast import (
    Comment,
    Emit,
    Expr,
    FieldAccess,
    ForEach,
    Let,
    ListExpr,
    Literal,
    PlanProgram,
    RecordExpr,
    Statement,
    ToolCall,
    VarRef,
)
from .parser import RESERVED

_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_INDENT = "    "


def _check_name(name: str, what: str) -> str:
    if not _IDENT_RE.match(name) or name in RESERVED:
        raise ValueError(f"{what} {name!r} is not a valid identifier")
    return name


def format_expr(expr: Expr) -> str:
    if isinstance(expr, Literal):
        v = expr.value
        if isinstance(v, bool) or v is None:
            raise ValueError(f"literal {v!r} has no surface syntax")
        if isinstance(v, str):
            return json.dumps(v, ensure_ascii=False)
        if isinstance(v, int):
            return str(v)
        if isinstance(v, float):
            if math.isinf(v) or math.isnan(v):
                raise ValueError(f"real literal {v!r} has no surface syntax")
            return repr(v)
        raise ValueError(f"unsupported literal type {type(v).__name__}")
    if isinstance(expr, ListExpr):
        return "[" + ", ".join(format_expr(e) for e in expr.items) + "]"
    if isinstance(expr, RecordExpr):
        parts = (f"{json.dumps(k, ensure_ascii=False)}: {format_expr(v)}" for k, v in expr.fields)
        return "{" + ", ".join(parts) + "}"
    if isinstance(expr, VarRef):
        return _check_name(expr.name, "variable")
    if isinstance(expr, FieldAccess):
        base = format_expr(expr.base)
        # A numeric literal base would lex together with the dot ("1.x"),
        # so it gets wrapped.
        if isinstance(expr.base, Literal) and isinstance(expr.base.value, (int, float)):
            base = f"({base})"
        return f"{base}.{_check_name(expr.key, 'field')}"
    if isinstance(expr, ToolCall):
        args = ", ".join(
            f"{_check_name(k, 'argument')}={format_expr(v)}" for k, v in expr.args
        )
        return f"{_check_name(expr.tool, 'tool')}({args})"
    raise ValueError(f"unsupported expression node {type(expr).__name__}")


def _format_statement(stmt: Statement, depth: int, lines: list[str]) -> None:
    pad = _INDENT * depth
    if isinstance(stmt, Comment):
        if "\n" in stmt.text:
            raise ValueError("comment text cannot span lines")
        lines.append(f"{pad}# {stmt.text}" if stmt.text else f"{pad}#")
    elif isinstance(stmt, Let):
        lines.append(f"{pad}let {_check_name(stmt.name, 'name')} = {format_expr(stmt.value)}")
    elif isinstance(stmt, ForEach):
        lines.append(
            f"{pad}for {_check_name(stmt.var, 'loop variable')} in "
            f"{format_expr(stmt.iterable)} {{"
        )
        for inner in stmt.body:
            _format_statement(inner, depth + 1, lines)
        lines.append(f"{pad}}}")
    elif isinstance(stmt, Emit):
        lines.append(f"{pad}emit {format_expr(stmt.call)}")
    else:
        raise ValueError(f"unsupported statement node {type(stmt).__name__}")


def format_plan(program: PlanProgram) -> str:
    """Deterministic canonical source text for a program."""
    if not program.statements:
        return ""
    lines: list[str] = []
    for stmt in program.statements:
        _format_statement(stmt, 0, lines)
    return "\n".join(lines) + "\n"
