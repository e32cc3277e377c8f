"""Mutation primitives for the three update categories.

All three operations are pure: they validate their preconditions, then
return a new Database. On any error the input value is untouched, so a
failed commit can simply keep using the original database.
"""

from __future__ import annotations

from dataclasses import replace

from .model import (
    ColumnCollisionError,
    ColumnDef,
    Database,
    DtypeError,
    DuplicatePrimaryKeyError,
    ForeignKeyViolationError,
    OverwriteAttemptError,
    RowNotFoundError,
    SchemaError,
    Table,
    UnknownPrimaryKeyError,
    canonicalize_value,
)


def _existing_pk_values(table: Table) -> set:
    idx = table.pk_index
    dtype = table.primary_key.dtype
    return {canonicalize_value(row[idx], dtype) for row in table.rows}


def _check_foreign_key(db: Database, table: Table, col: ColumnDef, value) -> None:
    fk = col.foreign_key
    if fk is None or value is None:
        return
    target = db.table(fk.table)
    needle = canonicalize_value(value, target.column(fk.column).dtype)
    if target.find_row(needle) is None:
        raise ForeignKeyViolationError(
            f"{table.name}.{col.name} value {needle!r} has no match in {fk.table}.{fk.column}"
        )


def infill_cells(db: Database, table_name: str, pk_value, updates: dict) -> Database:
    """Fill NULL cells of an existing row.

    Every updated cell must currently be NULL (overwrites are rejected) and
    every value must conform to its column dtype. Returns a new database
    with exactly those cells set.
    """
    table = db.table(table_name)
    row_i = table.find_row(pk_value)
    if row_i is None:
        raise RowNotFoundError(f"table {table_name!r} has no row with primary key {pk_value!r}")
    if not updates:
        return db
    row = list(table.rows[row_i])
    for col_name, value in updates.items():
        col = table.column(col_name)
        if value is None:
            raise DtypeError(f"cannot infill NULL into {table_name}.{col_name}")
        canon = canonicalize_value(value, col.dtype)
        current = row[table.column_index(col_name)]
        if current is not None:
            raise OverwriteAttemptError(
                f"{table_name}.{col_name} for primary key {pk_value!r} is already "
                f"{current!r}; overwriting existing values is unsupported"
            )
        _check_foreign_key(db, table, col, canon)
        row[table.column_index(col_name)] = canon
    new_rows = list(table.rows)
    new_rows[row_i] = tuple(row)
    return db.replace_table(replace(table, rows=tuple(new_rows)))


def mint_primary_key(table: Table, taken: set) -> int:
    """Next integer primary key: one past the current maximum."""
    if table.primary_key.dtype != "integer":
        raise SchemaError(
            f"cannot mint a primary key for {table.name!r}: "
            f"{table.primary_key.name} is {table.primary_key.dtype}, not integer"
        )
    numeric = [v for v in taken if isinstance(v, int)]
    return (max(numeric) + 1) if numeric else 1


def insert_rows(db: Database, table_name: str, rows: list[dict]) -> Database:
    """Append new rows given as partial column->value maps.

    Omitted columns take the schema default, or NULL when there is none.
    An omitted integer primary key is minted as max(existing)+1; any other
    primary-key dtype must be supplied. Explicit None means NULL.
    """
    table = db.table(table_name)
    pk = table.primary_key
    taken = _existing_pk_values(table)
    new_rows = list(table.rows)
    for row_spec in rows:
        for col_name in row_spec:
            if not table.has_column(col_name):
                raise SchemaError(f"table {table_name!r} has no column {col_name!r}")
        cells = []
        for col in table.columns:
            if row_spec.get(col.name) is not None:
                value = canonicalize_value(row_spec[col.name], col.dtype)
            elif col.is_primary_key:
                value = mint_primary_key(table, taken)
            elif col.name in row_spec:
                value = None  # explicit NULL
            else:
                value = col.default
            if value is None and (col.is_primary_key or not col.nullable):
                raise DtypeError(
                    f"{table_name}.{col.name} is non-nullable and the row supplies no value"
                )
            if value is not None:
                _check_foreign_key(db, table, col, value)
            cells.append(value)
        pk_value = cells[table.pk_index]
        if pk_value in taken:
            raise DuplicatePrimaryKeyError(
                f"table {table_name!r} already has a row with primary key {pk_value!r}"
            )
        taken.add(pk_value)
        new_rows.append(tuple(cells))
    return db.replace_table(replace(table, rows=tuple(new_rows)))


def add_columns(
    db: Database,
    table_name: str,
    new_columns: list[ColumnDef],
    values: dict | None = None,
) -> Database:
    """Extend a table with new columns and attach values to existing rows.

    `values` maps primary-key value -> {column name -> value}; rows not
    mentioned get the column default (possibly NULL). New columns cannot be
    primary keys and must not collide with existing names.
    """
    table = db.table(table_name)
    values = values or {}
    seen = set(table.column_names)
    for col in new_columns:
        if col.name in seen:
            raise ColumnCollisionError(
                f"table {table_name!r} already has a column named {col.name!r}"
            )
        seen.add(col.name)
        if col.is_primary_key:
            raise SchemaError(f"new column {col.name!r} cannot be a primary key")
        if col.default is not None:
            canonicalize_value(col.default, col.dtype)
        if col.foreign_key is not None and not db.has_table(col.foreign_key.table):
            raise SchemaError(
                f"new column {col.name!r}: foreign key references missing table "
                f"{col.foreign_key.table!r}"
            )

    pk_dtype = table.primary_key.dtype
    row_index_by_pk = {}
    for i, row in enumerate(table.rows):
        row_index_by_pk[canonicalize_value(row[table.pk_index], pk_dtype)] = i

    extra_by_row: dict[int, dict[str, object]] = {}
    for pk_value, cols in values.items():
        canon_pk = canonicalize_value(pk_value, pk_dtype)
        if canon_pk not in row_index_by_pk:
            raise UnknownPrimaryKeyError(
                f"table {table_name!r} has no row with primary key {pk_value!r}"
            )
        for col in new_columns:
            if col.name in cols:
                extra_by_row.setdefault(row_index_by_pk[canon_pk], {})[col.name] = (
                    canonicalize_value(cols[col.name], col.dtype)
                )
        unknown = set(cols) - {c.name for c in new_columns}
        if unknown:
            raise SchemaError(
                f"values for primary key {pk_value!r} name columns not being added: "
                f"{sorted(unknown)}"
            )

    new_defs = tuple(table.columns) + tuple(new_columns)
    new_rows = []
    for i, row in enumerate(table.rows):
        extras = extra_by_row.get(i, {})
        appended = []
        for col in new_columns:
            value = extras.get(col.name, col.default)
            if value is not None:
                value = canonicalize_value(value, col.dtype)
            if value is None and not col.nullable:
                raise DtypeError(
                    f"{table_name}.{col.name} is non-nullable but row {i} gets NULL"
                )
            appended.append(value)
        new_rows.append(tuple(row) + tuple(appended))

    out = db.replace_table(replace(table, columns=new_defs, rows=tuple(new_rows)))
    # FK conformance of attached values is checked against the final database.
    new_table = out.table(table_name)
    for i, row in enumerate(new_table.rows):
        for col in new_columns:
            _check_foreign_key(out, new_table, col, row[new_table.column_index(col.name)])
    return out
