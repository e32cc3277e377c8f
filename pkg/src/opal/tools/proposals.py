"""DI / PR / AC as pure proposal builders.

None of these touch the database: each returns a plain record describing an
update for the executor to commit through db-core. That keeps integrity
checking in one place and lets the analyzer inspect proposed updates
without side effects.

Proposal shapes:
  infill       {"kind": "infill", "table", "pk_value", "updates": {col: value}}
  insert       {"kind": "insert", "table", "rows": [{col: value}, ...]}
  add_columns  {"kind": "add_columns", "table", "columns": [...], "values": {pk: {col: value}}}

Insert rows may hold symbolic handles "@new:<Table>:<index>" in FK cells,
naming the primary key minted for another proposal's row; the executor
resolves them at commit.
"""

from __future__ import annotations

from opal.db import DTYPES, Database, Table, canonicalize_value

from .errors import LinkingError, ToolArgumentError
from .linker import DEFAULT_LINK_THRESHOLD, link_entities

ENTITY_KEY = "entity"
NEW_ROW_PREFIX = "@new:"


def new_row_handle(table: str, index: int) -> str:
    return f"{NEW_ROW_PREFIX}{table}:{index}"


def parse_handle(value: object) -> tuple[str, int] | None:
    """(table, row index) for "@new:Table:i" strings, else None."""
    if not isinstance(value, str) or not value.startswith(NEW_ROW_PREFIX):
        return None
    body = value[len(NEW_ROW_PREFIX) :]
    table, sep, index = body.rpartition(":")
    if not sep or not table or not index.isdigit():
        return None
    return table, int(index)


def _resolve_row(entry: object, db: Database, table: Table, threshold: float):
    """Primary-key value for an entity mention, via exact match or linking."""
    [link] = link_entities([entry], db, table.name, threshold)
    if link["pk_value"] is None:
        raise LinkingError(
            f"cannot link {entry!r} to any row of {table.name!r} "
            f"(best score {link['score']})"
        )
    return link["pk_value"]


def build_infill_proposal(
    data_entry: dict,
    db: Database,
    table_name: str,
    link_threshold: float = DEFAULT_LINK_THRESHOLD,
) -> dict:
    """DI: fill NULL cells of one existing row.

    ``data_entry`` carries the row identity — the primary-key column by
    name, or an ``"entity"`` mention to link — plus column values. NULL
    values are dropped, not proposed. Column names are checked at commit,
    not here: an AC proposal in the same plan may add the column first.
    """
    if not isinstance(data_entry, dict):
        raise ToolArgumentError("DI: data_entry must be a record")
    table = db.table(table_name)
    entry = dict(data_entry)
    pk_name = table.primary_key.name
    if pk_name in entry:
        pk_value = canonicalize_value(entry.pop(pk_name), table.primary_key.dtype)
        entry.pop(ENTITY_KEY, None)
    elif ENTITY_KEY in entry:
        pk_value = _resolve_row(entry.pop(ENTITY_KEY), db, table, link_threshold)
    else:
        raise ToolArgumentError(
            f"DI: data_entry needs {pk_name!r} or {ENTITY_KEY!r} to identify the row"
        )
    updates = {name: value for name, value in entry.items() if value is not None}
    return {"kind": "infill", "table": table.name, "pk_value": pk_value, "updates": updates}


def build_insert_proposal(data_entries: list, db: Database, table_name: str) -> dict:
    """PR: append rows. Each entry is a partial column->value record."""
    if not isinstance(data_entries, (list, tuple)):
        raise ToolArgumentError("PR: data_entries must be a list of records")
    table = db.table(table_name)
    rows = []
    for entry in data_entries:
        if not isinstance(entry, dict):
            raise ToolArgumentError(f"PR: row {entry!r} is not a record")
        rows.append({name: value for name, value in entry.items() if value is not None})
    return {"kind": "insert", "table": table.name, "rows": rows}


def _column_spec(raw: object) -> dict:
    if not isinstance(raw, dict) or "name" not in raw or "dtype" not in raw:
        raise ToolArgumentError(
            f"AC: each new column needs at least name and dtype, got {raw!r}"
        )
    allowed = {"name", "dtype", "default", "nullable", "fk_table", "fk_column"}
    unknown = set(raw) - allowed
    if unknown:
        raise ToolArgumentError(f"AC: unknown column keys {sorted(unknown)}")
    if raw["dtype"] not in DTYPES:
        raise ToolArgumentError(
            f"AC: dtype {raw['dtype']!r} is not one of {sorted(DTYPES)}"
        )
    spec = {
        "name": str(raw["name"]),
        "dtype": raw["dtype"],
        "default": raw.get("default"),
        "nullable": bool(raw.get("nullable", True)),
    }
    if raw.get("fk_table"):
        spec["fk"] = {"table": raw["fk_table"], "column": raw.get("fk_column", "")}
    return spec


def build_add_columns_proposal(
    data_entry: dict,
    db: Database,
    table_name: str,
    new_columns: list,
    link_threshold: float = DEFAULT_LINK_THRESHOLD,
) -> dict:
    """AC: add columns, optionally attaching one row's values.

    ``data_entry`` is ``{}`` for a pure schema change, or
    ``{"entity": mention-or-pk, "values": {column: value}}`` to set the new
    cells of one row. Per-row calls merge at commit when their column lists
    agree.
    """
    if not isinstance(data_entry, dict):
        raise ToolArgumentError("AC: data_entry must be a record")
    if not isinstance(new_columns, (list, tuple)) or not new_columns:
        raise ToolArgumentError("AC: new_columns must be a non-empty list")
    table = db.table(table_name)
    columns = [_column_spec(c) for c in new_columns]
    names = [c["name"] for c in columns]
    if len(set(names)) != len(names):
        raise ToolArgumentError(f"AC: duplicate new column names in {names}")

    unknown_keys = set(data_entry) - {ENTITY_KEY, "values"}
    if unknown_keys:
        raise ToolArgumentError(
            f"AC: data_entry keys must be 'entity' and 'values', got {sorted(unknown_keys)}"
        )
    raw_values = data_entry.get("values") or {}
    if not isinstance(raw_values, dict):
        raise ToolArgumentError("AC: 'values' must be a record of column -> value")
    for key in raw_values:
        if key not in names:
            raise ToolArgumentError(f"AC: value for {key!r}, which is not being added")

    values: dict = {}
    cleaned = {k: v for k, v in raw_values.items() if v is not None}
    if cleaned:
        if ENTITY_KEY not in data_entry:
            raise ToolArgumentError("AC: values given without an 'entity' to attach them to")
        pk_value = _resolve_row(data_entry[ENTITY_KEY], db, table, link_threshold)
        values[pk_value] = cleaned
    return {"kind": "add_columns", "table": table.name, "columns": columns, "values": values}
