"""Analyzer: category routing, simulated-test grading, stage ordering."""

from __future__ import annotations

import pytest

from opal.analyzer import analyze, run_simulated_test, wrap_diagnostics
from opal.db import ColumnDef, Database, Table
from opal.feedback import Feedback, render_feedback
from opal.observer import analyze_schema, entity_type_word, generate_mock_instance
from opal.plan import parse


@pytest.fixture()
def db():
    return Database(
        (
            Table(
                "Movie",
                (
                    ColumnDef("Id", "integer", is_primary_key=True, nullable=False),
                    ColumnDef("Name", "text"),
                    ColumnDef("Budget", "integer"),
                ),
                ((1, "Quiet Storm", None), (2, "Long Night", 5)),
            ),
        )
    )


def parsed(source: str):
    result = parse(source)
    assert result.ok, [d.render() for d in result.diagnostics]
    return result.program


def correct_di_plan(mock) -> str:
    type_word = entity_type_word(mock.table)
    return (
        "for doc in documents {\n"
        f'    let names = NER(text = doc, type = "{type_word}")\n'
        "    for name in names {\n"
        '        let attrs = AE(text = doc, entity = name, attribute_list = ["Budget"])\n'
        '        emit DI(data_entry = {"entity": name, "Budget": attrs.Budget}, '
        'database = database, table_name = "Movie")\n'
        "    }\n"
        "}\n"
    )


class TestWrapDiagnostics:
    def test_parse_errors_become_syntax_feedback(self):
        result = parse("let x = \n")
        assert not result.ok
        findings = wrap_diagnostics(result.diagnostics)
        assert findings
        assert all(f.category == "syntax" for f in findings)
        assert all(f.span is not None for f in findings)

    def test_warnings_are_not_findings(self):
        from opal.plan import Diagnostic, Severity, Span

        warn = Diagnostic(Severity.WARNING, "style", "could be tidier", Span(1, 1, 1))
        err = Diagnostic(Severity.ERROR, "kind-mismatch", "expected list", Span(2, 1, 1))
        findings = wrap_diagnostics([warn, err])
        assert len(findings) == 1
        assert findings[0].category == "syntax"
        assert "kind-mismatch" in findings[0].message


class TestAnalyzeStatic:
    def test_kind_mismatch_is_syntax_category(self, db):
        # attribute_list given a bare string where a list is required.
        program = parsed(
            'let a = AE(text = "t", entity = "e", attribute_list = "Budget")\n'
        )
        findings = analyze(program, db)
        assert len(findings) == 1
        assert findings[0].category == "syntax"
        assert "list" in findings[0].message

    def test_unknown_table_is_syntax_category(self, db):
        program = parsed(
            'emit DI(data_entry = {"Id": 1}, database = database, table_name = "Nowhere")\n'
        )
        findings = analyze(program, db)
        assert findings and findings[0].category == "syntax"

    def test_static_findings_preempt_simulation(self, db):
        mock = generate_mock_instance(db, "DI", "Movie", seed=3)
        program = parsed('let a = AE(text = "t", entity = "e", attribute_list = "x")\n')
        findings = analyze(program, db, mock=mock)
        assert all(f.category == "syntax" for f in findings)

    def test_clean_static_plan_without_mock_returns_empty(self, db):
        program = parsed('let x = NER(text = "t", type = "movie")\nemit DI(data_entry = {"Id": 1, "Budget": 3}, database = database, table_name = "Movie")\n')
        assert analyze(program, db) == []


class TestSimulatedTest:
    def test_correct_plan_clears_its_own_mock(self, db):
        mock = generate_mock_instance(db, "DI", "Movie", seed=7)
        program = parsed(correct_di_plan(mock))
        proposals, findings = run_simulated_test(program, mock)
        assert findings == []
        assert proposals  # the plan did emit

    def test_analyze_returns_empty_for_correct_plan(self, db):
        mock = generate_mock_instance(db, "DI", "Movie", seed=7)
        program = parsed(correct_di_plan(mock))
        assert analyze(program, db, analyze_schema(db), mock) == []

    def test_never_emitting_plan_misses_every_gold_update(self, db):
        mock = generate_mock_instance(db, "DI", "Movie", seed=5)
        program = parsed('let x = NER(text = "t", type = "movie")\n')
        _, findings = run_simulated_test(program, mock)
        assert findings
        assert all(f.category == "logic" for f in findings)
        assert all(f.evidence is not None for f in findings)
        assert any("never set" in f.message for f in findings)

    def test_wrong_value_carries_expected_and_actual(self, db):
        mock = generate_mock_instance(db, "DI", "Movie", seed=11)
        gold = sorted(mock.gold_diff(), key=lambda e: e.column)
        entry = gold[0]
        program = parsed(
            f'emit DI(data_entry = {{"{entry.pk_column}": {entry.pk_value!r}, '
            f'"{entry.column}": "999999"}}, database = database, '
            f'table_name = "{entry.table}")\n'
            .replace("'", '"')
        )
        _, findings = run_simulated_test(program, mock)
        wrong = [f for f in findings if "wrong value" in f.message]
        assert wrong
        expected, actual = wrong[0].evidence
        assert expected != actual

    def test_duplicate_pk_proposal_is_integrity(self, db):
        mock = generate_mock_instance(db, "RP", "Movie", seed=2)
        existing_pk = mock.database.table("Movie").rows[0][0]
        program = parsed(
            f'emit PR(data_entries = [{{"Id": {existing_pk}, "Name": "Clone"}}], '
            f'database = database, table_name = "Movie")\n'
        )
        _, findings = run_simulated_test(program, mock)
        assert len(findings) == 1
        assert findings[0].category == "integrity"

    def test_runtime_failure_is_logic_with_evidence(self, db):
        mock = generate_mock_instance(db, "DI", "Movie", seed=4)
        program = parsed(
            'let x = Link(data_entries = ["ghost"], database = database, '
            'table_name = "Movie")\nfor item in instruction {\n    let y = item\n}\n'
        )
        # `for` over text passes no static muster either, so build the mock
        # failure through a tool instead: unknown relation via RE is fine
        # statically but the rules backend returns [], which is harmless.
        # Use a plan whose AE receives a non-record base at runtime.
        program = parsed(
            'let names = NER(text = "no entities here whatsoever", type = "movie")\n'
            "for name in names {\n"
            '    emit DI(data_entry = {"entity": name}, database = database, table_name = "Movie")\n'
            "}\n"
        )
        proposals, findings = run_simulated_test(program, mock)
        # zero entities -> zero proposals -> every gold update missing
        assert findings and all(f.category == "logic" for f in findings)

    def test_mismatch_list_is_capped(self, db):
        wide = Database(
            (
                Table(
                    "Movie",
                    (
                        ColumnDef("Id", "integer", is_primary_key=True, nullable=False),
                        ColumnDef("Name", "text"),
                        ColumnDef("Budget", "integer"),
                    ),
                    tuple((i, f"Film {i}", None) for i in range(1, 30)),
                ),
            )
        )
        mock = generate_mock_instance(wide, "RP", "Movie", seed=1)
        program = parsed('let x = NER(text = "t", type = "movie")\n')
        _, findings = run_simulated_test(program, mock)
        assert len(findings) <= 9
        if len(findings) == 9:
            assert "omitted" in findings[-1].message


class TestFeedbackRendering:
    def test_render_includes_category_and_span(self):
        from opal.plan import Span

        f = Feedback("syntax", "bad token", span=Span(3, 7, 2))
        text = f.render()
        assert "[syntax]" in text and "line 3" in text and "col 7" in text

    def test_render_feedback_joins_or_reports_clean(self):
        assert render_feedback([]) == "No findings."
        two = [Feedback("logic", "a"), Feedback("integrity", "b")]
        joined = render_feedback(two)
        assert "[logic]" in joined and "[integrity]" in joined
