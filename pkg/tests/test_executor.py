"""Executor: evaluation order, handles, commit ordering, atomicity."""

from __future__ import annotations

import pytest

from opal.db import ColumnDef, Database, DiffTuple, ForeignKey, Table, diff
from opal.executor import ExecutionResult, execute
from opal.plan import Emit, Literal, PlanProgram, RecordExpr, ToolCall, parse, typecheck
from opal.tools import MockBackend, RulesBackend, ToolHub, fixture_key


def movie_db():
    return Database(
        (
            Table(
                "Movie",
                (
                    ColumnDef("Id", "integer", is_primary_key=True, nullable=False),
                    ColumnDef("Name", "text"),
                    ColumnDef("Budget", "integer"),
                    ColumnDef("Genre", "text"),
                ),
                ((1, "Crimson Tide", None, None),),
            ),
        )
    )


def three_table_db():
    return Database(
        (
            Table(
                "Movie",
                (
                    ColumnDef("MovieID", "integer", is_primary_key=True, nullable=False),
                    ColumnDef("Name", "text"),
                ),
                ((1, "Old Film"),),
            ),
            Table(
                "Actor",
                (
                    ColumnDef("ActorID", "integer", is_primary_key=True, nullable=False),
                    ColumnDef("Name", "text"),
                ),
                ((7, "Maya Hart"),),
            ),
            Table(
                "Character",
                (
                    ColumnDef("CharacterID", "integer", is_primary_key=True, nullable=False),
                    ColumnDef("Name", "text"),
                    ColumnDef("MovieID", "integer", foreign_key=ForeignKey("Movie", "MovieID")),
                    ColumnDef("ActorID", "integer", foreign_key=ForeignKey("Actor", "ActorID")),
                ),
                (),
            ),
        )
    )


def load_plan(source: str, db) -> "PlanProgram":
    result = parse(source)
    assert result.ok, [d.render() for d in result.diagnostics]
    problems = [d for d in typecheck(result.program, db) if d.severity.value == "error"]
    assert not problems, [d.render() for d in problems]
    return result.program


DI_PLAN = """\
# Extract each movie's missing attributes and fill them in.
for doc in documents {
    let names = NER(text = doc, type = "movie")
    for name in names {
        let attrs = AE(text = doc, entity = name, attribute_list = ["Budget", "Genre"])
        emit DI(data_entry = {"entity": name, "Budget": attrs.Budget, "Genre": attrs.Genre}, database = database, table_name = "Movie")
    }
}
"""

DOC = "Crimson Tide is a movie. The Budget of Crimson Tide is 64000000. The Genre of Crimson Tide is Action."


class TestEvaluation:
    def test_zero_emit_plan_changes_nothing(self):
        db = movie_db()
        plan = load_plan('let x = NER(text = "Crimson Tide is a movie.", type = "movie")\n', db)
        result = execute(plan, db, [], RulesBackend())
        assert result.ok
        assert result.database == db
        assert result.diff == frozenset()
        assert result.proposals == ()

    def test_di_plan_fills_cells(self):
        db = movie_db()
        result = execute(load_plan(DI_PLAN, db), db, [DOC], RulesBackend())
        assert result.ok, result.feedback
        row = result.database.table("Movie").rows[0]
        assert row == (1, "Crimson Tide", 64000000, "Action")
        assert result.diff == frozenset(
            {
                DiffTuple("Movie", "Id", 1, "Budget", 64000000),
                DiffTuple("Movie", "Id", 1, "Genre", "Action"),
            }
        )

    def test_diff_matches_independent_recomputation(self):
        db = movie_db()
        result = execute(load_plan(DI_PLAN, db), db, [DOC], RulesBackend())
        assert result.diff == diff(db, result.database)

    def test_missing_field_reads_as_null_and_is_dropped(self):
        db = movie_db()
        doc = "Crimson Tide is a movie. The Budget of Crimson Tide is 5."
        result = execute(load_plan(DI_PLAN, db), db, [doc], RulesBackend())
        assert result.ok
        assert result.database.table("Movie").rows[0] == (1, "Crimson Tide", 5, None)

    def test_instruction_and_documents_are_bound(self):
        db = movie_db()
        plan = load_plan("let d = documents\nlet i = instruction\n", db)
        result = execute(plan, db, ["a"], RulesBackend(), instruction="do things")
        assert result.ok

    def test_foreach_over_non_list_is_logic_feedback(self):
        # The static checker also rejects this; the runtime guard is the
        # backstop for plans that evade it (e.g. built as raw ASTs).
        parsed = parse('for x in instruction {\n    let y = x\n}\n')
        assert parsed.ok
        result = execute(parsed.program, movie_db(), [], RulesBackend())
        assert not result.ok
        assert result.feedback.category == "logic"
        assert "not a list" in result.feedback.message

    def test_tool_error_becomes_logic_feedback(self):
        db = movie_db()
        plan = load_plan(DI_PLAN, db)
        result = execute(plan, db, [DOC], MockBackend({}))  # no fixtures, no fallback
        assert not result.ok
        assert result.feedback.category == "logic"
        assert result.feedback.evidence is not None
        assert result.database == db

    def test_timeout_aborts_with_feedback(self):
        db = movie_db()
        plan = load_plan(DI_PLAN, db)
        result = execute(plan, db, [DOC], RulesBackend(), timeout_s=-1.0)
        assert not result.ok
        assert "budget" in result.feedback.message

    def test_emit_requires_terminal_tool_at_runtime(self):
        # Built directly so the static checker never sees it.
        plan = PlanProgram(
            (
                Emit(
                    ToolCall(
                        "NER",
                        (("text", Literal("x")), ("type", Literal("movie"))),
                    )
                ),
            )
        )
        result = execute(plan, movie_db(), [], RulesBackend())
        assert not result.ok
        assert "terminal" in result.feedback.message


RP_THREE_TABLE_PLAN = """\
# Add the new movie, its actor, and the character linking them.
emit PR(data_entries = [{"Name": "New Film"}], database = database, table_name = "Movie")
emit PR(data_entries = [{"Name": "Ann Stone"}], database = database, table_name = "Actor")
emit PR(data_entries = [{"Name": "Rex Vale", "MovieID": "@new:Movie:0", "ActorID": "@new:Actor:0"}], database = database, table_name = "Character")
"""


class TestCommit:
    def test_three_table_insert_with_handles(self):
        db = three_table_db()
        plan = load_plan(RP_THREE_TABLE_PLAN, db)
        result = execute(plan, db, [], RulesBackend())
        assert result.ok, result.feedback
        movie = result.database.table("Movie").rows[-1]
        actor = result.database.table("Actor").rows[-1]
        character = result.database.table("Character").rows[-1]
        assert movie == (2, "New Film")
        assert actor == (8, "Ann Stone")
        assert character == (1, "Rex Vale", 2, 8)

    def test_emit_order_does_not_matter_for_fk_parents(self):
        # Child emitted first; the FK-topological commit order still works.
        db = three_table_db()
        lines = RP_THREE_TABLE_PLAN.strip().splitlines()
        reordered = "\n".join([lines[0], lines[3], lines[1], lines[2]]) + "\n"
        result = execute(load_plan(reordered, db), db, [], RulesBackend())
        assert result.ok, result.feedback
        assert result.database.table("Character").rows[-1] == (1, "Rex Vale", 2, 8)

    def test_unresolvable_handle_is_integrity_feedback(self):
        db = three_table_db()
        plan = load_plan(
            'emit PR(data_entries = [{"Name": "Rex", "ActorID": "@new:Actor:5"}], '
            'database = database, table_name = "Character")\n',
            db,
        )
        result = execute(plan, db, [], RulesBackend())
        assert not result.ok
        assert result.feedback.category == "integrity"
        assert result.database == db

    def test_ac_commits_before_di_regardless_of_emit_order(self):
        db = movie_db()
        plan = load_plan(
            'emit DI(data_entry = {"Id": 1, "Rating": "8.1"}, database = database, table_name = "Movie")\n'
            'emit AC(data_entry = {}, database = database, table_name = "Movie", '
            'new_columns = [{"name": "Rating", "dtype": "real"}])\n',
            db,
        )
        result = execute(plan, db, [], RulesBackend())
        assert result.ok, result.feedback
        table = result.database.table("Movie")
        assert table.rows[0][table.column_index("Rating")] == 8.1

    def test_ac_value_merge_across_emits(self):
        db = Database(
            (
                Table(
                    "Movie",
                    (
                        ColumnDef("Id", "integer", is_primary_key=True, nullable=False),
                        ColumnDef("Name", "text"),
                    ),
                    ((1, "A"), (2, "B")),
                ),
            )
        )
        plan = load_plan(
            'emit AC(data_entry = {"entity": "A", "values": {"Rating": 1.5}}, database = database, '
            'table_name = "Movie", new_columns = [{"name": "Rating", "dtype": "real"}])\n'
            'emit AC(data_entry = {"entity": "B", "values": {"Rating": 2.5}}, database = database, '
            'table_name = "Movie", new_columns = [{"name": "Rating", "dtype": "real"}])\n',
            db,
        )
        result = execute(plan, db, [], RulesBackend())
        assert result.ok, result.feedback
        table = result.database.table("Movie")
        idx = table.column_index("Rating")
        assert [row[idx] for row in table.rows] == [1.5, 2.5]

    def test_conflicting_ac_values_rejected(self):
        db = movie_db()
        plan = load_plan(
            'emit AC(data_entry = {"entity": "Crimson Tide", "values": {"Rating": 1.0}}, database = database, '
            'table_name = "Movie", new_columns = [{"name": "Rating", "dtype": "real"}])\n'
            'emit AC(data_entry = {"entity": "Crimson Tide", "values": {"Rating": 2.0}}, database = database, '
            'table_name = "Movie", new_columns = [{"name": "Rating", "dtype": "real"}])\n',
            db,
        )
        result = execute(plan, db, [], RulesBackend())
        assert not result.ok
        assert result.feedback.category == "logic"

    def test_duplicate_pk_insert_is_integrity_feedback(self):
        db = movie_db()
        plan = load_plan(
            'emit PR(data_entries = [{"Id": 1, "Name": "Duplicate"}], database = database, '
            'table_name = "Movie")\n',
            db,
        )
        result = execute(plan, db, [], RulesBackend())
        assert not result.ok
        assert result.feedback.category == "integrity"
        assert result.database == db


class TestAtomicity:
    def test_partial_failure_returns_input_database_object(self):
        db = movie_db()
        # First proposal is committable; the second infills a non-NULL cell.
        plan = load_plan(
            'emit DI(data_entry = {"Id": 1, "Budget": 10}, database = database, table_name = "Movie")\n'
            'emit DI(data_entry = {"Id": 1, "Name": "Other"}, database = database, table_name = "Movie")\n',
            db,
        )
        result = execute(plan, db, [], RulesBackend())
        assert not result.ok
        assert result.database is db  # the very same object, not a copy

    def test_injected_mid_plan_failures_never_leak_state(self, rng):
        db = movie_db()
        plan = load_plan(DI_PLAN, db)
        # A backend whose NER works but whose AE always explodes mid-plan.
        fixtures = {
            fixture_key("NER", {"text": DOC, "type": "movie"}): ["Crimson Tide"],
        }
        result = execute(plan, db, [DOC], MockBackend(fixtures))
        assert not result.ok
        assert result.database is db


class TestTraceReplay:
    def test_trace_fixture_replay_reproduces_database(self):
        db = movie_db()
        plan = load_plan(DI_PLAN, db)
        first = execute(plan, db, [DOC], RulesBackend())
        assert first.ok
        replayed = execute(plan, db, [DOC], MockBackend(first.trace.fixtures()))
        assert replayed.ok
        assert replayed.database == first.database
        assert replayed.diff == first.diff

    def test_trace_serializes_to_jsonl(self):
        import json as json_mod

        db = movie_db()
        result = execute(load_plan(DI_PLAN, db), db, [DOC], RulesBackend())
        lines = result.trace.to_jsonl().strip().splitlines()
        events = [json_mod.loads(line) for line in lines]
        kinds = {e["event"] for e in events}
        assert {"invoke", "emit", "commit"} <= kinds

    def test_passing_a_hub_directly(self):
        db = movie_db()
        plan = load_plan(DI_PLAN, db)
        result = execute(plan, db, [DOC], ToolHub(RulesBackend()))
        assert result.ok
