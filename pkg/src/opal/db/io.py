"""Canonical single-file database format.

One UTF-8 JSON document::

    {"tables": [{"name": ..., "columns": [{"name", "dtype", "pk", "fk",
     "default", "nullable"}], "rows": [[cell, ...], ...]}]}

NULL is JSON null; cell order matches column order. Loading validates the
schema, runs the integrity checker, and canonicalizes every cell, so a
successfully loaded Database satisfies all invariants.
"""

from __future__ import annotations

import json

from .model import (
    ColumnDef,
    Database,
    DatabaseError,
    ForeignKey,
    InvariantViolationError,
    SchemaError,
    Table,
    canonicalize_database,
    check_integrity,
    validate_schema,
)

_COLUMN_KEYS = {"name", "dtype", "pk", "fk", "default", "nullable"}


class DatabaseFormatError(DatabaseError):
    """Malformed database file. `offset` is a byte offset when known."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")
        self.offset = offset


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise DatabaseFormatError(message)


def _parse_column(raw, table_name: str) -> ColumnDef:
    _require(isinstance(raw, dict), f"table {table_name!r}: column entry must be an object")
    unknown = set(raw) - _COLUMN_KEYS
    _require(not unknown, f"table {table_name!r}: unknown column keys {sorted(unknown)}")
    _require("name" in raw and isinstance(raw["name"], str), f"table {table_name!r}: column needs a string name")
    _require("dtype" in raw and isinstance(raw["dtype"], str), f"column {raw.get('name')!r}: needs a string dtype")
    fk = None
    if raw.get("fk") is not None:
        fk_raw = raw["fk"]
        _require(
            isinstance(fk_raw, dict) and set(fk_raw) == {"table", "column"},
            f"column {raw['name']!r}: fk must be {{\"table\", \"column\"}}",
        )
        fk = ForeignKey(table=fk_raw["table"], column=fk_raw["column"])
    try:
        return ColumnDef(
            name=raw["name"],
            dtype=raw["dtype"],
            is_primary_key=bool(raw.get("pk", False)),
            foreign_key=fk,
            default=raw.get("default"),
            nullable=bool(raw.get("nullable", True)) and not raw.get("pk", False),
        )
    except SchemaError as exc:
        raise DatabaseFormatError(f"table {table_name!r}: {exc}") from exc


def load_database(data: bytes | str) -> Database:
    """Parse, validate, and canonicalize a database file."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise DatabaseFormatError(f"invalid JSON: {exc.msg}", offset=exc.pos) from exc

    _require(isinstance(doc, dict) and set(doc) == {"tables"}, 'top level must be {"tables": [...]}')
    _require(isinstance(doc["tables"], list), '"tables" must be an array')
    tables = []
    for t_raw in doc["tables"]:
        _require(isinstance(t_raw, dict), "table entry must be an object")
        unknown = set(t_raw) - {"name", "columns", "rows"}
        _require(not unknown, f"table entry has unknown keys {sorted(unknown)}")
        _require(isinstance(t_raw.get("name"), str), "table needs a string name")
        name = t_raw["name"]
        _require(isinstance(t_raw.get("columns"), list), f"table {name!r}: columns must be an array")
        columns = tuple(_parse_column(c, name) for c in t_raw["columns"])
        rows_raw = t_raw.get("rows", [])
        _require(isinstance(rows_raw, list), f"table {name!r}: rows must be an array")
        rows = []
        for i, row in enumerate(rows_raw):
            _require(isinstance(row, list), f"table {name!r} row {i}: must be an array")
            _require(
                len(row) == len(columns),
                f"table {name!r} row {i}: {len(row)} cells for {len(columns)} columns",
            )
            rows.append(tuple(row))
        try:
            tables.append(Table(name=name, columns=columns, rows=tuple(rows)))
        except SchemaError as exc:
            raise DatabaseFormatError(str(exc)) from exc

    db = Database(tuple(tables))
    validate_schema(db)
    violations = check_integrity(db)
    if violations:
        first = violations[0]
        raise InvariantViolationError(
            f"{len(violations)} integrity violation(s); first: {first.kind} in table "
            f"{first.table!r} row {first.row_index} column {first.column!r}: {first.message}",
            violations,
        )
    return canonicalize_database(db)


def database_to_dict(db: Database) -> dict:
    return {
        "tables": [
            {
                "name": t.name,
                "columns": [
                    {
                        "name": c.name,
                        "dtype": c.dtype,
                        "pk": c.is_primary_key,
                        "fk": (
                            {"table": c.foreign_key.table, "column": c.foreign_key.column}
                            if c.foreign_key
                            else None
                        ),
                        "default": c.default,
                        "nullable": c.nullable,
                    }
                    for c in t.columns
                ],
                "rows": [list(row) for row in t.rows],
            }
            for t in db.tables
        ]
    }


def save_database(db: Database) -> str:
    """Serialize to the canonical JSON document (deterministic)."""
    return json.dumps(database_to_dict(db), ensure_ascii=False, indent=2)
