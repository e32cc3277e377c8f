"""Parser behavior: grammar mapping, diagnostics, spans, recovery."""

from __future__ import annotations

from opal.plan import (
    Comment,
    Emit,
    FieldAccess,
    ForEach,
    Let,
    ListExpr,
    Literal,
    PlanProgram,
    RecordExpr,
    Severity,
    ToolCall,
    VarRef,
    parse,
)


class TestParseSuccess:
    def test_empty_source(self):
        result = parse("")
        assert result.ok
        assert result.program == PlanProgram(())

    def test_whitespace_only(self):
        assert parse("\n\n   \n").program == PlanProgram(())

    def test_let_with_tool_call(self):
        result = parse('let x = NER(text=doc, type="Movie")')
        assert result.ok
        assert result.program == PlanProgram(
            (
                Let(
                    "x",
                    ToolCall(
                        "NER",
                        (("text", VarRef("doc")), ("type", Literal("Movie"))),
                    ),
                ),
            )
        )

    def test_comment_statement(self):
        result = parse("# find directors\n")
        assert result.program == PlanProgram((Comment("find directors"),))

    def test_trailing_comment_becomes_statement(self):
        result = parse("let x = 1 # explanation")
        assert result.program == PlanProgram(
            (Let("x", Literal(1)), Comment("explanation"))
        )

    def test_foreach_block(self):
        src = "for d in documents {\n    emit PR(data_entries=[], database=db, table_name=\"T\")\n}\n"
        result = parse(src)
        assert result.ok
        (loop,) = result.program.statements
        assert isinstance(loop, ForEach)
        assert loop.var == "d"
        assert loop.iterable == VarRef("documents")
        assert isinstance(loop.body[0], Emit)

    def test_empty_loop_body(self):
        result = parse("for x in items {\n}\n")
        assert result.program.statements[0].body == ()

    def test_literals(self):
        result = parse('let a = [1, -2.5, "s", 1e3, {"k": 7}]')
        (stmt,) = result.program.statements
        assert stmt.value == ListExpr(
            (
                Literal(1),
                Literal(-2.5),
                Literal("s"),
                Literal(1000.0),
                RecordExpr((("k", Literal(7)),)),
            )
        )
        assert isinstance(stmt.value.items[3].value, float)

    def test_string_escapes(self):
        result = parse('let s = "a\\"b\\\\c\\nd\\u00e9"')
        assert result.program.statements[0].value == Literal('a"b\\c\ndé')

    def test_field_access_chain(self):
        result = parse("let v = rec.a.b")
        assert result.program.statements[0].value == FieldAccess(
            FieldAccess(VarRef("rec"), "a"), "b"
        )

    def test_multiline_call_and_record(self):
        src = 'let r = AE(\n    text=t,\n    entity=e,\n    attribute_list=[\n        "A",\n        "B",\n    ],\n)\n'
        # trailing commas are not part of the grammar
        assert not parse(src).ok
        src_ok = 'let r = AE(\n    text=t,\n    entity=e,\n    attribute_list=[\n        "A",\n        "B"\n    ]\n)\n'
        assert parse(src_ok).ok

    def test_parenthesized_expression(self):
        result = parse("let x = (name)")
        assert result.program.statements[0].value == VarRef("name")


class TestParseErrors:
    def assert_error(self, source: str, code: str):
        result = parse(source)
        assert not result.ok
        assert result.program is None
        codes = [d.code for d in result.diagnostics if d.severity is Severity.ERROR]
        assert code in codes, f"expected {code} in {codes}"
        for d in result.diagnostics:
            assert d.span.line >= 1 and d.span.column >= 1

    def test_unterminated_string(self):
        self.assert_error('let x = "abc', "unterminated-string")

    def test_bad_escape(self):
        self.assert_error('let x = "a\\qb"', "bad-escape")

    def test_missing_equals(self):
        self.assert_error("let x 5", "unexpected-token")

    def test_keyword_as_name(self):
        self.assert_error("let for = 1", "reserved-word")

    def test_emit_requires_call(self):
        self.assert_error("emit 42", "emit-requires-call")

    def test_unclosed_loop(self):
        self.assert_error("for x in items {\n    let y = 1\n", "unexpected-eof")

    def test_positional_arguments_rejected(self):
        self.assert_error('let x = NER("text", "Movie")', "unexpected-token")

    def test_unquoted_record_key_rejected(self):
        self.assert_error("let x = {k: 1}", "unexpected-token")

    def test_stray_token_after_statement(self):
        self.assert_error("let x = 1 2", "stray-token")

    def test_unknown_character(self):
        self.assert_error("let x = 1 ; let y = 2", "unexpected-character")

    def test_recovery_collects_multiple_errors(self):
        result = parse("let = 1\nlet x = \nlet y = 2\nemit 5\n")
        assert not result.ok
        assert len([d for d in result.diagnostics if d.severity is Severity.ERROR]) >= 3

    def test_error_spans_point_into_source(self):
        source = "let x = 1\nlet x 2\n"
        result = parse(source)
        (diag,) = [d for d in result.diagnostics]
        lines = source.splitlines()
        assert lines[diag.span.line - 1][diag.span.column - 1] == "2"
