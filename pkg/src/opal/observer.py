"""The database-expert agent: schema profiling, demonstrations, mock data.

Three jobs, all offline and deterministic:

* :func:`analyze_schema` summarizes every column — detected format, value
  range, semantic note, null rate, and a suggested extraction tool — into an
  :class:`Observation` the planner can read or embed in a prompt.
* :func:`select_demonstrations` samples existing column values so IE tools
  see the granularity the database actually uses.
* :func:`generate_mock_instance` fabricates a small schema-faithful database
  plus documents, tool fixtures, and the intended gold outcome, giving the
  analyzer something concrete to execute plans against before any real run.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field

from opal.db import (
    ColumnDef,
    Database,
    SchemaError,
    Table,
    add_columns,
    canonical_str,
    diff,
    fk_topological_order,
    infill_cells,
    insert_rows,
)
from opal.tools import Demonstration, fixture_key

DEFAULT_CATEGORICAL_K = 12
DEFAULT_DEMO_K = 20

TASK_TYPES = ("DI", "RP", "CA")


# ---------------------------------------------------------------------------
# Observation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ColumnProfile:
    """One column's summary as shown to the planner."""

    name: str
    dtype: str
    detected_format: str
    value_range: str
    semantic_note: str
    null_rate: float
    suggested_tool: str
    is_primary_key: bool = False
    references: str | None = None  # "Table.Column" for foreign keys
    categorical_values: tuple = ()

    def render(self) -> str:
        flags = []
        if self.is_primary_key:
            flags.append("primary key")
        if self.references:
            flags.append(f"references {self.references}")
        head = f"{self.name} ({self.dtype}{', ' + ', '.join(flags) if flags else ''})"
        return (
            f"{head}: format {self.detected_format}; range {self.value_range}; "
            f"nulls {self.null_rate:.0%}; tool {self.suggested_tool} — {self.semantic_note}"
        )


@dataclass(frozen=True)
class TableProfile:
    name: str
    row_count: int
    entity_column: str | None
    columns: tuple[ColumnProfile, ...]

    def column(self, name: str) -> ColumnProfile:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"no profile for column {name!r} in table {self.name!r}")


@dataclass(frozen=True)
class Observation:
    """Per-table, per-column database summary. Pure data; JSON-serializable."""

    tables: tuple[TableProfile, ...]
    categorical_k: int = DEFAULT_CATEGORICAL_K

    def table(self, name: str) -> TableProfile:
        for t in self.tables:
            if t.name == name:
                return t
        raise SchemaError(f"no profile for table {name!r}")

    def to_dict(self) -> dict:
        return {
            "categorical_k": self.categorical_k,
            "tables": [
                {
                    "name": t.name,
                    "row_count": t.row_count,
                    "entity_column": t.entity_column,
                    "columns": [
                        {
                            "name": c.name,
                            "dtype": c.dtype,
                            "detected_format": c.detected_format,
                            "value_range": c.value_range,
                            "semantic_note": c.semantic_note,
                            "null_rate": c.null_rate,
                            "suggested_tool": c.suggested_tool,
                            "is_primary_key": c.is_primary_key,
                            "references": c.references,
                            "categorical_values": list(c.categorical_values),
                        }
                        for c in t.columns
                    ],
                }
                for t in self.tables
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False, sort_keys=True)

    def render(self) -> str:
        """Human-readable block, the form a planner prompt embeds."""
        blocks = []
        for t in self.tables:
            entity = f"; entity column: {t.entity_column}" if t.entity_column else ""
            lines = [f"Table {t.name} ({t.row_count} rows{entity})"]
            lines.extend(f"  - {c.render()}" for c in t.columns)
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks)


# ---------------------------------------------------------------------------
# Pattern mining
# ---------------------------------------------------------------------------

_CLASS_ATOMS = {"d": r"\d", "u": "[A-Z]", "l": "[a-z]", "a": "[A-Za-z]", "s": " "}


def _char_class(ch: str, coarse: bool) -> str:
    if ch.isdigit():
        return "d"
    if ch.isalpha():
        if coarse:
            return "a"
        return "u" if ch.isupper() else "l"
    if ch == " ":
        return "s"
    return ch  # literal punctuation class of its own


def _runs(text: str, coarse: bool) -> list[list]:
    runs: list[list] = []
    for ch in text:
        cls = _char_class(ch, coarse)
        if runs and runs[-1][0] == cls:
            runs[-1][1] += 1
        else:
            runs.append([cls, 1])
    return runs


def _emit(cls: str, counts: set[int]) -> str:
    atom = _CLASS_ATOMS.get(cls, re.escape(cls))
    if counts == {1}:
        return atom
    if len(counts) == 1:
        return f"{atom}{{{counts.pop()}}}"
    return f"{atom}+"


def mine_pattern(values: list) -> str:
    """A regex (fullmatch semantics) covering every non-NULL value.

    Tries progressively coarser generalizations: exact character-class runs
    (digits, upper, lower, punctuation), then case-folded letter runs, then
    a single character-class union that always succeeds. Returns "unknown"
    when there are no values to mine.
    """
    strings = [canonical_str(v) for v in values if v is not None]
    if not strings:
        return "unknown"
    for coarse in (False, True):
        seqs = [_runs(s, coarse) for s in strings]
        classes = [tuple(cls for cls, _ in seq) for seq in seqs]
        if len(set(classes)) == 1 and classes[0]:
            merged = []
            for i, cls in enumerate(classes[0]):
                merged.append(_emit(cls, {seq[i][1] for seq in seqs}))
            return "".join(merged)
    atoms = sorted(
        {_CLASS_ATOMS.get(_char_class(ch, True), re.escape(ch)) for s in strings for ch in s}
    )
    if not atoms:
        return ""  # every value is the empty string
    body = "".join(a[1:-1] if a.startswith("[") else ("0-9" if a == r"\d" else a) for a in atoms)
    quantifier = "+" if all(strings) else "*"
    return f"[{body}]{quantifier}"


# ---------------------------------------------------------------------------
# Schema analysis
# ---------------------------------------------------------------------------


def _name_words(name: str) -> str:
    spaced = re.sub(r"(?<=[a-z0-9])(?=[A-Z])", " ", name).replace("_", " ")
    return " ".join(spaced.split()).lower()


def entity_type_word(table_name: str) -> str:
    """The natural-language type word for a table, as documents phrase it."""
    return _name_words(table_name)


def entity_column_of(table: Table) -> str | None:
    """The column naming a row in prose: the first text non-FK column."""
    for col in table.columns:
        if col.dtype == "text" and col.foreign_key is None:
            return col.name
    return None


def _value_range(col: ColumnDef, non_null: list, categorical: list) -> str:
    if not non_null:
        return "empty"
    if categorical:
        return "one of: " + " | ".join(canonical_str(v) for v in categorical)
    if col.dtype in ("integer", "real", "date"):
        lo, hi = min(non_null), max(non_null)
        if lo == hi:
            return canonical_str(lo)
        return f"{canonical_str(lo)} .. {canonical_str(hi)}"
    by_freq: dict = {}
    for v in non_null:
        by_freq[v] = by_freq.get(v, 0) + 1
    samples = sorted(by_freq, key=lambda v: (-by_freq[v], canonical_str(v)))[:3]
    shown = ", ".join(json.dumps(canonical_str(v), ensure_ascii=False) for v in samples)
    return f"{len(by_freq)} distinct values; e.g. {shown}"


def _semantic_note(table: Table, col: ColumnDef, categorical: list, entity: str | None) -> str:
    words = _name_words(col.name)
    if col.is_primary_key:
        return f"primary key identifying one {table.name} row"
    if col.foreign_key is not None:
        return f"{words}: reference to a row of {col.foreign_key.table}"
    if categorical:
        return f"{words}: categorical label with {len(categorical)} known values"
    if col.name == entity:
        return f"{words}: the name that identifies a {entity_type_word(table.name)} in text"
    if col.dtype == "date":
        return f"{words}: calendar date in YYYY-MM-DD form"
    if col.dtype in ("integer", "real"):
        return f"{words}: numeric attribute of the {entity_type_word(table.name)}"
    return f"{words}: free-text attribute of the {entity_type_word(table.name)}"


def analyze_schema(db: Database, categorical_k: int = DEFAULT_CATEGORICAL_K) -> Observation:
    """Profile every table and column. Pure and deterministic."""
    tables = []
    for table in db.tables:
        entity = entity_column_of(table)
        profiles = []
        for i, col in enumerate(table.columns):
            values = [row[i] for row in table.rows]
            non_null = [v for v in values if v is not None]
            null_rate = 1.0 if not values else (len(values) - len(non_null)) / len(values)
            distinct: list = []
            for v in non_null:
                if v not in distinct:
                    distinct.append(v)
            categorical = []
            if (
                col.dtype == "text"
                and not col.is_primary_key
                and col.foreign_key is None
                and 1 <= len(distinct) <= categorical_k
            ):
                categorical = sorted(distinct)
            if col.is_primary_key or col.foreign_key is not None:
                tool = "Link"
            elif categorical:
                tool = "Classify"
            else:
                tool = "AE"
            fk = col.foreign_key
            profiles.append(
                ColumnProfile(
                    name=col.name,
                    dtype=col.dtype,
                    detected_format=mine_pattern(non_null),
                    value_range=_value_range(col, non_null, categorical),
                    semantic_note=_semantic_note(table, col, categorical, entity),
                    null_rate=null_rate,
                    suggested_tool=tool,
                    is_primary_key=col.is_primary_key,
                    references=f"{fk.table}.{fk.column}" if fk else None,
                    categorical_values=tuple(categorical),
                )
            )
        tables.append(
            TableProfile(
                name=table.name,
                row_count=len(table.rows),
                entity_column=entity,
                columns=tuple(profiles),
            )
        )
    return Observation(tables=tuple(tables), categorical_k=categorical_k)


# ---------------------------------------------------------------------------
# Demonstrations
# ---------------------------------------------------------------------------


def select_demonstrations(
    db: Database, table: str, column: str, k: int = DEFAULT_DEMO_K, seed: int = 0
) -> Demonstration:
    """Up to k distinct non-NULL values of the column, uniformly sampled.

    Deterministic for a fixed seed; distinct columns draw independently.
    """
    t = db.table(table)
    values = t.column_values(column)  # raises SchemaError for unknown columns
    distinct: list = []
    for v in values:
        if v is not None and v not in distinct:
            distinct.append(v)
    if len(distinct) > k:
        rng = random.Random(f"{seed}:{table}:{column}")
        distinct = rng.sample(distinct, k)
    return Demonstration(table=table, column=column, values=tuple(distinct))


# ---------------------------------------------------------------------------
# Mock instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MockInstance:
    """A fabricated task: tiny database, documents, fixtures, gold outcome.

    ``database`` shares the source schema but holds only synthetic rows;
    ``gold`` is ``database`` after the intended operations, so
    ``gold_diff()`` is the update set a correct plan must reproduce.
    ``fixtures`` are mock-backend entries covering the canonical extraction
    calls; the documents are additionally worded so the rule backend parses
    them, covering calls the fixtures miss.
    """

    task_type: str
    table: str
    instruction: str
    database: Database
    gold: Database
    documents: tuple[str, ...]
    fixtures: dict = field(default_factory=dict)

    def gold_diff(self) -> set:
        return diff(self.database, self.gold)


_FIRST_WORDS = (
    "Amber", "Blue", "Crimson", "Delta", "Ember", "Falcon",
    "Golden", "Harbor", "Iron", "Jade", "Keystone", "Lunar",
)
_SECOND_WORDS = (
    "Arrow", "Bridge", "Canyon", "Drift", "Echo", "Forge",
    "Grove", "Haven", "Island", "Junction", "Knoll", "Lantern",
)


class _Synthesizer:
    """Seeded value factory that avoids colliding with known names."""

    def __init__(self, rng: random.Random, taken: set[str]):
        self.rng = rng
        self.taken = set(taken)

    def fresh_name(self) -> str:
        while True:
            name = f"{self.rng.choice(_FIRST_WORDS)} {self.rng.choice(_SECOND_WORDS)}"
            if name not in self.taken:
                self.taken.add(name)
                return name

    def value(self, col: ColumnDef, pool: list) -> object:
        """A synthetic cell for `col`; `pool` holds real values to imitate."""
        if col.dtype == "integer":
            return self.rng.randint(10, 999)
        if col.dtype == "real":
            return round(self.rng.uniform(1.0, 99.0), 1)
        if col.dtype == "date":
            return (
                f"{2015 + self.rng.randrange(9)}-"
                f"{self.rng.randrange(1, 13):02d}-{self.rng.randrange(1, 29):02d}"
            )
        if pool:
            return self.rng.choice(sorted(pool, key=canonical_str))
        return f"{self.rng.choice(_FIRST_WORDS).lower()} {self.rng.choice(_SECOND_WORDS).lower()}"

    def primary_key(self, col: ColumnDef, used: set) -> object:
        """A fresh primary-key value not present in `used`."""
        if col.dtype == "text":
            return self.fresh_name()
        while True:
            value = self.value(col, [])
            if value not in used:
                return value


def _scope_tables(db: Database, target: str) -> list[str]:
    """Target plus its transitive FK parents, ordered parents-first."""
    wanted = {target}
    frontier = [target]
    while frontier:
        table = db.table(frontier.pop())
        for col in table.columns:
            if col.foreign_key is not None and col.foreign_key.table not in wanted:
                wanted.add(col.foreign_key.table)
                frontier.append(col.foreign_key.table)
    return [name for name in fk_topological_order(db) if name in wanted]


def _pick_target(db: Database, task_type: str) -> str:
    if not db.tables:
        raise SchemaError("cannot generate a mock instance for an empty database")
    def has_infillable(t: Table) -> bool:
        return any(not c.is_primary_key and c.nullable for c in t.columns)
    for table in db.tables:
        if task_type == "DI" and has_infillable(table) and entity_column_of(table):
            return table.name
        if task_type == "CA" and entity_column_of(table):
            return table.name
        if task_type == "RP" and table.primary_key.dtype == "integer":
            return table.name
    return db.tables[0].name


def _categorical_pool(col_index: int, table: Table, categorical_k: int) -> list:
    col = table.columns[col_index]
    if col.dtype != "text" or col.is_primary_key or col.foreign_key is not None:
        return []
    values = [row[col_index] for row in table.rows if row[col_index] is not None]
    distinct = sorted({v for v in values if isinstance(v, str)})
    return distinct if 1 <= len(distinct) <= categorical_k else []


def _infill_column(table: Table, entity: str | None) -> str | None:
    """The cell to blank for a DI mock: nullable, ideally a plain attribute."""
    candidates = [c for c in table.columns if not c.is_primary_key and c.nullable]
    if not candidates:
        return None
    def tier(col: ColumnDef) -> int:
        return 0 if (col.foreign_key is None and col.name != entity) else 1
    return min(candidates, key=lambda c: (tier(c), table.column_index(c.name))).name


def _attribute_sentence(attr: str, entity_name: str, value: object) -> str:
    return f"The {attr} of {entity_name} is {canonical_str(value)}."


def _intro_sentence(name: str, type_word: str) -> str:
    article = "an" if type_word[:1] in "aeiou" else "a"
    return f"{name} is {article} {type_word}."


def _template_attr_list(table: Table, entity: str | None) -> list[str]:
    return [c.name for c in table.columns if not c.is_primary_key and c.name != entity]


def _add_extraction_fixtures(
    fixtures: dict,
    doc: str,
    table: Table,
    entity_name: str,
    stated: dict,
    categorical_k: int,
) -> None:
    """Fixtures for the canonical NER / AE / Classify calls over one document."""
    type_word = entity_type_word(table.name)
    for type_arg in {type_word, table.name, table.name.lower()}:
        fixtures[fixture_key("NER", {"text": doc, "type": type_arg})] = [entity_name]
    entity = entity_column_of(table)
    attr_list = _template_attr_list(table, entity)
    stated_strs = {k: canonical_str(v) for k, v in stated.items()}
    for requested in (attr_list, [k for k in attr_list if k in stated_strs]):
        if requested:
            fixtures[
                fixture_key("AE", {"text": doc, "entity": entity_name, "attribute_list": requested})
            ] = {k: v for k, v in stated_strs.items() if k in requested}
    for i, col in enumerate(table.columns):
        if col.name not in stated_strs:
            continue
        pool = _categorical_pool(i, table, categorical_k)
        if pool:
            fixtures[fixture_key("Classify", {"text": doc, "label_list": pool})] = stated_strs[col.name]


def generate_mock_instance(
    db: Database,
    task_type: str,
    table_name: str | None = None,
    seed: int = 0,
    categorical_k: int = DEFAULT_CATEGORICAL_K,
    new_columns: list | None = None,
) -> MockInstance:
    """Fabricate a small task instance for simulated testing.

    The mock database reuses the full source schema with synthetic rows in
    the target table and its FK ancestors only. Gold is derived by applying
    the intended operations through the mutation primitives, so it is
    integrity-clean by construction.

    For CA, ``new_columns`` — (name, dtype) pairs — pins which columns the
    mock adds. A plan built from a real instruction adds *those* columns,
    so the simulated gold must use the same names or every comparison
    would fail; without the pin the mock invents a fresh column name.
    """
    if task_type not in TASK_TYPES:
        raise ValueError(f"unknown task type {task_type!r} (expected one of {TASK_TYPES})")
    target = table_name if table_name is not None else _pick_target(db, task_type)
    db.table(target)  # raises SchemaError for unknown tables
    rng = random.Random(f"{seed}:{task_type}:{target}")
    scope = _scope_tables(db, target)

    taken_names = {
        v
        for t in db.tables
        for row in t.rows
        for v in row
        if isinstance(v, str)
    }
    synth = _Synthesizer(rng, taken_names)

    # --- seed rows, parents before children -------------------------------
    mock = Database(tuple(Table(t.name, t.columns, ()) for t in db.tables))
    seeds = {"DI": 1, "RP": 2, "CA": 2}[task_type]
    null_cell: tuple[str, object] | None = None  # (column, intended value) for DI
    entity_names: dict[str, list[str]] = {}
    for name in scope:
        source = db.table(name)
        entity = entity_column_of(source)
        count = seeds if name == target else 2
        entity_names[name] = []
        used_pks: set = set()
        for i in range(count):
            spec: dict = {}
            for ci, col in enumerate(source.columns):
                if col.is_primary_key:
                    spec[col.name] = i + 1 if col.dtype == "integer" else synth.primary_key(col, used_pks)
                    used_pks.add(spec[col.name])
                elif col.foreign_key is not None:
                    parent = mock.table(col.foreign_key.table)
                    pks = [row[parent.pk_index] for row in parent.rows]
                    spec[col.name] = rng.choice(pks) if pks else None
                elif col.name == entity and col.dtype == "text":
                    spec[col.name] = synth.fresh_name()
                else:
                    spec[col.name] = synth.value(
                        col, _categorical_pool(ci, source, categorical_k)
                    )
            if name == target and task_type == "DI" and i == 0:
                hole = _infill_column(source, entity)
                if hole is not None:
                    null_cell = (hole, spec[hole])
                    spec[hole] = None
            mock = insert_rows(mock, name, [spec])
            ident = spec.get(entity) if entity else None
            entity_names[name].append(
                canonical_str(ident) if ident is not None else canonical_str(spec[source.primary_key.name])
            )

    # --- gold + documents + fixtures per task type ------------------------
    fixtures: dict = {}
    documents: list[str] = []
    target_table = mock.table(target)
    type_word = entity_type_word(target)

    if task_type == "DI":
        pk_value = target_table.rows[0][target_table.pk_index]
        entity_name = entity_names[target][0]
        if null_cell is None:
            # Degenerate schema with nothing to infill: state an existing
            # value so the instance is still well-formed, with an empty diff.
            gold = mock
            doc = _intro_sentence(entity_name, type_word)
            stated: dict = {}
        else:
            column, value = null_cell
            gold = infill_cells(mock, target, pk_value, {column: value})
            stated = {column: value}
            doc = " ".join(
                [_intro_sentence(entity_name, type_word), _attribute_sentence(column, entity_name, value)]
            )
        documents.append(doc)
        _add_extraction_fixtures(fixtures, doc, db.table(target), entity_name, stated, categorical_k)
        instruction = f"Fill in the missing values in table {target} using the documents."

    elif task_type == "RP":
        gold = mock
        new_pks: dict[str, object] = {}
        for name in scope:
            source = db.table(name)
            entity = entity_column_of(source)
            table_now = gold.table(name)
            existing_pks = {row[table_now.pk_index] for row in table_now.rows}
            spec = {}
            for ci, col in enumerate(source.columns):
                if col.is_primary_key:
                    if col.dtype == "integer":
                        continue  # minted by insert_rows
                    spec[col.name] = synth.primary_key(col, existing_pks)
                elif col.foreign_key is not None:
                    spec[col.name] = new_pks.get(col.foreign_key.table)
                elif col.name == entity and col.dtype == "text":
                    spec[col.name] = synth.fresh_name()
                else:
                    spec[col.name] = synth.value(col, _categorical_pool(ci, source, categorical_k))
            gold = insert_rows(gold, name, [spec])
            new_row = gold.table(name).rows[-1]
            new_pks[name] = new_row[table_now.pk_index]
            entity_name = (
                canonical_str(new_row[gold.table(name).column_index(entity)])
                if entity
                else canonical_str(new_pks[name])
            )
            stated = {
                col.name: new_row[gold.table(name).column_index(col.name)]
                for col in source.columns
                if not col.is_primary_key
                and col.name != entity
                and new_row[gold.table(name).column_index(col.name)] is not None
            }
            sentences = [_intro_sentence(entity_name, entity_type_word(name))]
            sentences += [
                _attribute_sentence(attr, entity_name, value) for attr, value in stated.items()
            ]
            doc = " ".join(sentences)
            documents.append(doc)
            _add_extraction_fixtures(fixtures, doc, source, entity_name, stated, categorical_k)
        noun = entity_type_word(target)
        instruction = f"Insert the new {noun} entries described in the documents into table {target}."

    else:  # CA
        specs = [
            (name, dtype)
            for name, dtype in (new_columns or [])
            if not target_table.has_column(name)
        ]
        if not specs:
            existing = {c.name.lower() for c in target_table.columns}
            pool = [n for n in ("Rating", "Score", "Remark", "Grade", "Label") if n.lower() not in existing]
            column = pool[0] if pool else f"Extra{rng.randrange(100)}"
            specs = [(column, rng.choice(("integer", "real", "text")))]
        new_cols = [ColumnDef(name=n, dtype=d, nullable=True) for n, d in specs]
        attr_names = [n for n, _ in specs]
        values = {}
        for i, row in enumerate(target_table.rows):
            pk_value = row[target_table.pk_index]
            entity_name = entity_names[target][i]
            row_values = {}
            sentences = [_intro_sentence(entity_name, type_word)]
            for new_col in new_cols:
                value = synth.value(new_col, [])
                row_values[new_col.name] = value
                sentences.append(_attribute_sentence(new_col.name, entity_name, value))
            values[pk_value] = row_values
            doc = " ".join(sentences)
            documents.append(doc)
            for type_arg in {type_word, target, target.lower()}:
                fixtures[fixture_key("NER", {"text": doc, "type": type_arg})] = [entity_name]
            fixtures[fixture_key("AE", {"text": doc, "entity": entity_name, "attribute_list": attr_names})] = {
                n: canonical_str(v) for n, v in row_values.items()
            }
        gold = add_columns(mock, target, new_cols, values)
        decl = ", ".join(f"{n} ({d})" for n, d in specs)
        instruction = (
            f"Add a new column {decl} to table {target} "
            f"and fill it for every existing row using the documents."
        )

    return MockInstance(
        task_type=task_type,
        table=target,
        instruction=instruction,
        database=mock,
        gold=gold,
        documents=tuple(documents),
        fixtures=fixtures,
    )
