"""Lexer and parser for the plan DSL.

Errors are reported as :class:`Diagnostic` values, never raised. The parser
recovers at line boundaries so one bad statement does not mask the rest of
the source; any error diagnostic means ``ParseResult.program`` is ``None``.

Newlines terminate statements. Inside brackets — ``( )``, ``[ ]``, record
``{ }`` — newlines are insignificant, so long literals and calls may wrap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

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
)

RESERVED = frozenset({"let", "for", "in", "emit"})

_PUNCT = frozenset("=()[]{},.:")
_MAX_DIAGNOSTICS = 25


@dataclass(frozen=True)
class _Token:
    kind: str  # ident | int | real | string | comment | newline | punct | eof
    text: str
    value: object
    line: int
    column: int

    @property
    def span(self) -> Span:
        return Span(self.line, self.column, max(len(self.text), 1))


@dataclass
class ParseResult:
    """Outcome of :func:`parse`: a program, or error diagnostics."""

    program: PlanProgram | None
    diagnostics: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return self.program is not None


def _is_ident_start(c: str) -> bool:
    return c.isalpha() or c == "_"


def _is_ident_char(c: str) -> bool:
    return c.isalnum() or c == "_"


class _Lexer:
    def __init__(self, source: str) -> None:
        self.source = source
        self.tokens: list[_Token] = []
        self.diagnostics: list[Diagnostic] = []

    def error(self, code: str, message: str, line: int, col: int, length: int = 1) -> None:
        self.diagnostics.append(
            Diagnostic(Severity.ERROR, code, message, Span(line, col, length))
        )

    def run(self) -> None:
        s = self.source
        i, line, col = 0, 1, 1
        n = len(s)
        while i < n:
            c = s[i]
            if c == "\n":
                self.tokens.append(_Token("newline", "\n", None, line, col))
                i += 1
                line += 1
                col = 1
            elif c in " \t\r":
                i += 1
                col += 1
            elif c == "#":
                j = i
                while j < n and s[j] != "\n":
                    j += 1
                text = s[i + 1 : j]
                if text.startswith(" "):
                    text = text[1:]
                self.tokens.append(_Token("comment", s[i:j], text, line, col))
                col += j - i
                i = j
            elif c == '"':
                i, col = self._string(i, line, col)
            elif c.isdigit() or (
                c in "+-."
                and i + 1 < n
                and (s[i + 1].isdigit() or (c in "+-" and s[i + 1] == "." and i + 2 < n and s[i + 2].isdigit()))
            ):
                i, col = self._number(i, line, col)
            elif _is_ident_start(c):
                j = i
                while j < n and _is_ident_char(s[j]):
                    j += 1
                self.tokens.append(_Token("ident", s[i:j], s[i:j], line, col))
                col += j - i
                i = j
            elif c in _PUNCT:
                self.tokens.append(_Token("punct", c, c, line, col))
                i += 1
                col += 1
            else:
                self.error("unexpected-character", f"unexpected character {c!r}", line, col)
                i += 1
                col += 1
        self.tokens.append(_Token("eof", "", None, line, col))

    def _string(self, i: int, line: int, col: int) -> tuple[int, int]:
        s = self.source
        j = i + 1
        while j < len(s):
            if s[j] == "\\":
                j += 2
                continue
            if s[j] == '"':
                break
            if s[j] == "\n":
                j = len(s)
                break
            j += 1
        if j >= len(s):
            self.error("unterminated-string", "string literal is not closed", line, col, 1)
            return len(s), col
        raw = s[i : j + 1]
        try:
            value = json.loads(raw, strict=False)
        except ValueError:
            self.error(
                "bad-escape", f"invalid escape sequence in string {raw!r}", line, col, len(raw)
            )
            value = ""
        self.tokens.append(_Token("string", raw, value, line, col))
        return j + 1, col + len(raw)

    def _number(self, i: int, line: int, col: int) -> tuple[int, int]:
        s = self.source
        j = i
        if s[j] in "+-":
            j += 1
        is_real = False
        while j < len(s) and s[j].isdigit():
            j += 1
        if j < len(s) and s[j] == ".":
            is_real = True
            j += 1
            while j < len(s) and s[j].isdigit():
                j += 1
        if j < len(s) and s[j] in "eE":
            k = j + 1
            if k < len(s) and s[k] in "+-":
                k += 1
            if k < len(s) and s[k].isdigit():
                is_real = True
                j = k
                while j < len(s) and s[j].isdigit():
                    j += 1
        text = s[i:j]
        if is_real:
            value: object = float(text)
            if value in (float("inf"), float("-inf")):
                self.error("invalid-number", f"real literal {text!r} out of range", line, col, len(text))
                value = 0.0
            self.tokens.append(_Token("real", text, value, line, col))
        else:
            self.tokens.append(_Token("int", text, int(text), line, col))
        return j, col + (j - i)


class _Parser:
    def __init__(self, tokens: list[_Token], diagnostics: list[Diagnostic]) -> None:
        self.tokens = tokens
        self.pos = 0
        self.diagnostics = diagnostics

    # -- token plumbing -----------------------------------------------------

    def peek(self, offset: int = 0) -> _Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at_punct(self, char: str) -> bool:
        tok = self.peek()
        return tok.kind == "punct" and tok.value == char

    def eat_punct(self, char: str) -> _Token | None:
        if self.at_punct(char):
            return self.next()
        return None

    def error(self, code: str, message: str, span: Span) -> None:
        if len(self.diagnostics) < _MAX_DIAGNOSTICS:
            self.diagnostics.append(Diagnostic(Severity.ERROR, code, message, span))

    def skip_newlines(self) -> None:
        while self.peek().kind == "newline":
            self.next()

    def recover_to_line_end(self) -> None:
        """Skip tokens (balancing brackets) until a top-level newline or EOF."""
        depth = 0
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                return
            if tok.kind == "newline" and depth <= 0:
                self.next()
                return
            if tok.kind == "punct" and tok.value in "([{":
                depth += 1
            elif tok.kind == "punct" and tok.value in ")]}":
                depth -= 1
            self.next()

    # -- grammar ------------------------------------------------------------

    def parse_program(self) -> PlanProgram:
        statements = self.parse_statements(stop_at_brace=False)
        return PlanProgram(tuple(statements))

    def parse_statements(self, stop_at_brace: bool) -> list[Statement]:
        out: list[Statement] = []
        while True:
            self.skip_newlines()
            tok = self.peek()
            if tok.kind == "eof":
                if stop_at_brace:
                    self.error("unexpected-eof", "expected '}' to close loop body", tok.span)
                return out
            if stop_at_brace and tok.kind == "punct" and tok.value == "}":
                return out
            if len(self.diagnostics) >= _MAX_DIAGNOSTICS:
                return out
            stmt = self.parse_statement()
            if stmt is not None:
                out.append(stmt)
                self.finish_statement(out)
            else:
                self.recover_to_line_end()

    def finish_statement(self, out: list[Statement]) -> None:
        """A statement must be followed by a line break, '}', EOF, or a comment."""
        tok = self.peek()
        if tok.kind in ("newline", "eof"):
            return
        if tok.kind == "punct" and tok.value == "}":
            return
        if tok.kind == "comment":
            self.next()
            out.append(Comment(str(tok.value), span=tok.span))
            return
        self.error(
            "stray-token",
            f"unexpected {tok.text!r} after statement; expected end of line",
            tok.span,
        )
        self.recover_to_line_end()

    def parse_statement(self) -> Statement | None:
        tok = self.peek()
        if tok.kind == "comment":
            self.next()
            return Comment(str(tok.value), span=tok.span)
        if tok.kind == "ident" and tok.value == "let":
            return self.parse_let()
        if tok.kind == "ident" and tok.value == "for":
            return self.parse_foreach()
        if tok.kind == "ident" and tok.value == "emit":
            return self.parse_emit()
        self.error(
            "unexpected-token",
            f"expected a statement (let / for / emit / comment), found {tok.text!r}",
            tok.span,
        )
        return None

    def parse_let(self) -> Statement | None:
        kw = self.next()
        name = self.expect_name("let")
        if name is None:
            return None
        if self.eat_punct("=") is None:
            self.error("unexpected-token", "expected '=' after let name", self.peek().span)
            return None
        value = self.parse_expr()
        if value is None:
            return None
        return Let(name.text, value, span=kw.span)

    def parse_foreach(self) -> Statement | None:
        kw = self.next()
        var = self.expect_name("for")
        if var is None:
            return None
        tok = self.peek()
        if not (tok.kind == "ident" and tok.value == "in"):
            self.error("unexpected-token", "expected 'in' after loop variable", tok.span)
            return None
        self.next()
        iterable = self.parse_expr()
        if iterable is None:
            return None
        if self.eat_punct("{") is None:
            self.error("unexpected-token", "expected '{' to open loop body", self.peek().span)
            return None
        body = self.parse_statements(stop_at_brace=True)
        if self.eat_punct("}") is None:
            return None
        return ForEach(var.text, iterable, tuple(body), span=kw.span)

    def parse_emit(self) -> Statement | None:
        kw = self.next()
        expr = self.parse_expr()
        if expr is None:
            return None
        if not isinstance(expr, ToolCall):
            self.error(
                "emit-requires-call",
                "emit takes a tool call (DI, PR, or AC)",
                expr.span or kw.span,
            )
            return None
        return Emit(expr, span=kw.span)

    def expect_name(self, context: str) -> _Token | None:
        tok = self.peek()
        if tok.kind != "ident":
            self.error("unexpected-token", f"expected a name after '{context}'", tok.span)
            return None
        if tok.value in RESERVED:
            self.error(
                "reserved-word", f"{tok.text!r} is a keyword and cannot be a name", tok.span
            )
            return None
        return self.next()

    # -- expressions ----------------------------------------------------

    def parse_expr(self) -> Expr | None:
        expr = self.parse_primary()
        if expr is None:
            return None
        while self.at_punct("."):
            dot = self.next()
            tok = self.peek()
            if tok.kind != "ident":
                self.error("unexpected-token", "expected a field name after '.'", tok.span)
                return None
            self.next()
            expr = FieldAccess(expr, tok.text, span=dot.span)
        return expr

    def parse_primary(self) -> Expr | None:
        tok = self.peek()
        if tok.kind in ("string", "int", "real"):
            self.next()
            return Literal(tok.value, span=tok.span)  # type: ignore[arg-type]
        if tok.kind == "punct" and tok.value == "[":
            return self.parse_list()
        if tok.kind == "punct" and tok.value == "{":
            return self.parse_record()
        if tok.kind == "punct" and tok.value == "(":
            self.next()
            self.skip_newlines()
            inner = self.parse_expr()
            if inner is None:
                return None
            self.skip_newlines()
            if self.eat_punct(")") is None:
                self.error("unexpected-token", "expected ')'", self.peek().span)
                return None
            return inner
        if tok.kind == "ident":
            if tok.value in RESERVED:
                self.error(
                    "unexpected-token", f"keyword {tok.text!r} cannot start an expression", tok.span
                )
                return None
            self.next()
            if self.at_punct("("):
                return self.parse_call(tok)
            return VarRef(tok.text, span=tok.span)
        self.error("unexpected-token", f"expected an expression, found {tok.text!r}", tok.span)
        return None

    def parse_call(self, name: _Token) -> Expr | None:
        self.next()  # consume '('
        args: list[tuple[str, Expr]] = []
        self.skip_newlines()
        if not self.at_punct(")"):
            while True:
                self.skip_newlines()
                key = self.peek()
                if key.kind != "ident":
                    self.error(
                        "unexpected-token",
                        f"arguments are named: expected 'name=value' in call to {name.text}",
                        key.span,
                    )
                    return None
                self.next()
                if self.eat_punct("=") is None:
                    self.error(
                        "unexpected-token",
                        f"expected '=' after argument name {key.text!r}",
                        self.peek().span,
                    )
                    return None
                self.skip_newlines()
                value = self.parse_expr()
                if value is None:
                    return None
                args.append((key.text, value))
                self.skip_newlines()
                if self.eat_punct(","):
                    continue
                break
        if self.eat_punct(")") is None:
            self.error("unexpected-token", "expected ')' to close call", self.peek().span)
            return None
        return ToolCall(name.text, tuple(args), span=name.span)

    def parse_list(self) -> Expr | None:
        open_tok = self.next()
        items: list[Expr] = []
        self.skip_newlines()
        if not self.at_punct("]"):
            while True:
                self.skip_newlines()
                item = self.parse_expr()
                if item is None:
                    return None
                items.append(item)
                self.skip_newlines()
                if self.eat_punct(","):
                    continue
                break
        if self.eat_punct("]") is None:
            self.error("unexpected-token", "expected ']' to close list", self.peek().span)
            return None
        return ListExpr(tuple(items), span=open_tok.span)

    def parse_record(self) -> Expr | None:
        open_tok = self.next()
        fields: list[tuple[str, Expr]] = []
        self.skip_newlines()
        if not self.at_punct("}"):
            while True:
                self.skip_newlines()
                key = self.peek()
                if key.kind != "string":
                    self.error(
                        "unexpected-token",
                        'record keys are quoted strings, e.g. {"Name": value}',
                        key.span,
                    )
                    return None
                self.next()
                if self.eat_punct(":") is None:
                    self.error(
                        "unexpected-token", "expected ':' after record key", self.peek().span
                    )
                    return None
                self.skip_newlines()
                value = self.parse_expr()
                if value is None:
                    return None
                fields.append((str(key.value), value))
                self.skip_newlines()
                if self.eat_punct(","):
                    continue
                break
        if self.eat_punct("}") is None:
            self.error("unexpected-token", "expected '}' to close record", self.peek().span)
            return None
        return RecordExpr(tuple(fields), span=open_tok.span)


def parse(source: str) -> ParseResult:
    """Parse plan source. Any error diagnostic means no program is returned."""
    lexer = _Lexer(source)
    lexer.run()
    parser = _Parser(lexer.tokens, list(lexer.diagnostics))
    program = parser.parse_program()
    diagnostics = parser.diagnostics
    if any(d.severity is Severity.ERROR for d in diagnostics):
        return ParseResult(None, diagnostics)
    return ParseResult(program, diagnostics)
