"""Shared builders: seeded random databases, mutations, and corruptions."""

from __future__ import annotations

import random

import pytest

from opal.db import ColumnDef, Database, ForeignKey, Table

WORDS = (
    "amber", "birch", "cedar", "delta", "ember", "fjord", "garnet", "harbor",
    "indigo", "juniper", "krypton", "lumen", "meadow", "nickel", "onyx",
    "pelican", "quartz", "raven", "sable", "tundra", "umber", "velvet",
)


def random_value(rng: random.Random, dtype: str):
    if dtype == "integer":
        return rng.randint(-50, 500)
    if dtype == "real":
        return round(rng.uniform(-100.0, 100.0), 3)
    if dtype == "date":
        return f"{rng.randint(1990, 2030):04d}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"
    return " ".join(rng.sample(WORDS, rng.randint(1, 3))).title()


def random_database(
    rng: random.Random,
    max_tables: int = 3,
    max_rows: int = 12,
    max_extra_columns: int = 4,
) -> Database:
    """A schema-valid, integrity-clean database with optional FK edges."""
    n_tables = rng.randint(1, max_tables)
    tables: list[Table] = []
    for t_i in range(n_tables):
        name = f"T{t_i}_{rng.choice(WORDS).title()}"
        pk_dtype = rng.choice(("integer", "text"))
        columns = [ColumnDef(name="Id", dtype=pk_dtype, is_primary_key=True, nullable=False)]
        n_extra = rng.randint(1, max_extra_columns)
        for c_i in range(n_extra):
            dtype = rng.choice(("text", "integer", "real", "date"))
            fk = None
            # Edges only point at earlier tables, keeping the graph acyclic.
            if tables and rng.random() < 0.25:
                parent = rng.choice(tables)
                fk = ForeignKey(table=parent.name, column="Id")
                dtype = parent.primary_key.dtype
            default = random_value(rng, dtype) if fk is None and rng.random() < 0.3 else None
            columns.append(
                ColumnDef(
                    name=f"C{c_i}_{rng.choice(WORDS)}",
                    dtype=dtype,
                    foreign_key=fk,
                    default=default,
                    nullable=True,
                )
            )
        rows = []
        pk_values: set = set()
        for r_i in range(rng.randint(0, max_rows)):
            cells = []
            for col in columns:
                if col.is_primary_key:
                    value = r_i + 1 if pk_dtype == "integer" else f"k{r_i}_{rng.choice(WORDS)}"
                    while value in pk_values:
                        value = f"{value}x"
                    pk_values.add(value)
                elif col.foreign_key is not None:
                    parent = next(t for t in tables if t.name == col.foreign_key.table)
                    parent_pks = [row[parent.pk_index] for row in parent.rows]
                    value = rng.choice(parent_pks) if parent_pks and rng.random() < 0.8 else None
                elif rng.random() < 0.2:
                    value = None
                else:
                    value = random_value(rng, col.dtype)
                cells.append(value)
            rows.append(tuple(cells))
        tables.append(Table(name=name, columns=tuple(columns), rows=tuple(rows)))
    return Database(tuple(tables))


def random_mutation(rng: random.Random, db: Database) -> Database:
    """Apply one random raw mutation (infill / insert / add-column).

    Works on the raw structures rather than through opal.db.mutations so
    diff tests have an independent source of (before, after) pairs.
    """
    kind = rng.choice(("infill", "insert", "add_column"))
    tables = list(db.tables)
    t_i = rng.randrange(len(tables))
    table = tables[t_i]

    if kind == "infill" and table.rows:
        r_i = rng.randrange(len(table.rows))
        null_cols = [
            i
            for i, c in enumerate(table.columns)
            if table.rows[r_i][i] is None and c.foreign_key is None
        ]
        if null_cols:
            c_i = rng.choice(null_cols)
            row = list(table.rows[r_i])
            row[c_i] = random_value(rng, table.columns[c_i].dtype)
            rows = list(table.rows)
            rows[r_i] = tuple(row)
            tables[t_i] = Table(table.name, table.columns, tuple(rows))
            return Database(tuple(tables))

    if kind == "add_column":
        dtype = rng.choice(("text", "integer", "real", "date"))
        new_col = ColumnDef(name=f"New_{rng.choice(WORDS)}_{rng.randint(0, 99)}", dtype=dtype)
        while table.has_column(new_col.name):
            new_col = ColumnDef(name=new_col.name + "x", dtype=dtype)
        rows = tuple(
            row + ((random_value(rng, dtype) if rng.random() < 0.6 else None),)
            for row in table.rows
        )
        tables[t_i] = Table(table.name, table.columns + (new_col,), rows)
        return Database(tuple(tables))

    # insert (also the fallback when infill found no NULL cell)
    cells = []
    existing = {row[table.pk_index] for row in table.rows}
    for col in table.columns:
        if col.is_primary_key:
            if col.dtype == "integer":
                numeric = [v for v in existing if isinstance(v, int)]
                value = (max(numeric) + 1) if numeric else 1
            else:
                value = f"new_{rng.choice(WORDS)}_{rng.randint(0, 9999)}"
                while value in existing:
                    value += "x"
        elif col.foreign_key is not None:
            parent = db.table(col.foreign_key.table)
            parent_pks = [row[parent.pk_index] for row in parent.rows]
            value = rng.choice(parent_pks) if parent_pks else None
        elif rng.random() < 0.25:
            value = None
        else:
            value = random_value(rng, col.dtype)
        cells.append(value)
    tables[t_i] = Table(table.name, table.columns, table.rows + (tuple(cells),))
    return Database(tuple(tables))


def corrupt_database(rng: random.Random, db: Database) -> tuple[Database, str]:
    """Inject one data-level fault; returns (corrupted, kind)."""
    candidates = [t for t in db.tables if t.rows]
    if not candidates:
        raise ValueError("need at least one non-empty table to corrupt")
    kinds = ["duplicate-pk", "dtype-mismatch"]
    if any(
        c.foreign_key is not None
        for t in candidates
        for c in t.columns
        if any(row[t.column_index(c.name)] is not None for row in t.rows)
    ):
        kinds.append("dangling-fk")
    kind = rng.choice(kinds)
    tables = list(db.tables)

    if kind == "duplicate-pk":
        table = rng.choice(candidates)
        t_i = db.tables.index(table)
        rows = list(table.rows)
        src = rng.choice(rows)
        victim_i = rng.randrange(len(rows))
        victim = list(rows[victim_i])
        victim[table.pk_index] = src[table.pk_index]
        rows.append(tuple(victim))
        tables[t_i] = Table(table.name, table.columns, tuple(rows))
        return Database(tuple(tables)), kind

    if kind == "dangling-fk":
        options = [
            (t, c_i, r_i)
            for t in candidates
            for c_i, c in enumerate(t.columns)
            if c.foreign_key is not None
            for r_i, row in enumerate(t.rows)
            if row[c_i] is not None
        ]
        table, c_i, r_i = rng.choice(options)
        t_i = db.tables.index(table)
        rows = list(table.rows)
        row = list(rows[r_i])
        row[c_i] = 999999 if table.columns[c_i].dtype == "integer" else "nonexistent-parent"
        rows[r_i] = tuple(row)
        tables[t_i] = Table(table.name, table.columns, tuple(rows))
        return Database(tuple(tables)), kind

    table = rng.choice(candidates)
    t_i = db.tables.index(table)
    non_fk = [
        (c_i, c)
        for c_i, c in enumerate(table.columns)
        if c.foreign_key is None and c.dtype != "text" and not c.is_primary_key
    ]
    rows = list(table.rows)
    r_i = rng.randrange(len(rows))
    row = list(rows[r_i])
    if non_fk:
        c_i, _col = rng.choice(non_fk)
        row[c_i] = "not-a-valid-value"
    else:
        # Fall back to a NULL primary key, also a dtype-mismatch violation.
        row[table.pk_index] = None
    rows[r_i] = tuple(row)
    tables[t_i] = Table(table.name, table.columns, tuple(rows))
    return Database(tuple(tables)), "dtype-mismatch"


@pytest.fixture
def rng():
    return random.Random(20240612)
