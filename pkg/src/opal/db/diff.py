"""Cell-level database diffing.

A diff is a set of :class:`DiffTuple` records, one per materialized cell
change: ``(table, pk column, pk value, column, value)``. Only non-NULL
values on the `after` side are recorded; value deletion is unsupported.
Comparison is exact after canonicalization, never fuzzy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .model import (
    Database,
    SchemaCompatibilityError,
    canonical_str,
    canonicalize_value,
)


@dataclass(frozen=True)
class DiffTuple:
    """One atomic cell change. `value` is never None."""

    table: str
    pk_column: str
    pk_value: str | int | float
    column: str
    value: str | int | float

    def as_list(self) -> list:
        return [self.table, self.pk_column, self.pk_value, self.column, self.value]


def diff_sort_key(t: DiffTuple) -> tuple[str, str, str, str, str]:
    return (
        t.table,
        t.pk_column,
        canonical_str(t.pk_value),
        t.column,
        canonical_str(t.value),
    )


def diff(before: Database, after: Database) -> frozenset[DiffTuple]:
    """Set of cells where `after` holds a non-NULL value differing from `before`.

    Covers changed cells, cells of newly inserted rows, and cells of newly
    added columns. Requires `after` to retain every table and column of
    `before` (new columns are allowed); otherwise raises
    SchemaCompatibilityError.
    """
    for b_table in before.tables:
        if not after.has_table(b_table.name):
            raise SchemaCompatibilityError(f"table {b_table.name!r} missing from after-database")
        a_table = after.table(b_table.name)
        for col in b_table.columns:
            if not a_table.has_column(col.name):
                raise SchemaCompatibilityError(
                    f"column {b_table.name}.{col.name} missing from after-database"
                )
            if a_table.column(col.name).dtype != col.dtype:
                raise SchemaCompatibilityError(
                    f"column {b_table.name}.{col.name} changed dtype "
                    f"({col.dtype} -> {a_table.column(col.name).dtype})"
                )

    changes: set[DiffTuple] = set()
    for a_table in after.tables:
        pk_col = a_table.primary_key
        pk_i = a_table.pk_index
        b_table = before.table(a_table.name) if before.has_table(a_table.name) else None
        before_rows: dict = {}
        if b_table is not None:
            b_pk_i = b_table.pk_index
            for row in b_table.rows:
                key = canonicalize_value(row[b_pk_i], pk_col.dtype)
                before_rows[key] = row
        for row in a_table.rows:
            pk_value = canonicalize_value(row[pk_i], pk_col.dtype)
            b_row = before_rows.get(pk_value)
            for col_i, col in enumerate(a_table.columns):
                value = canonicalize_value(row[col_i], col.dtype)
                if value is None:
                    continue
                old = None
                if b_row is not None and b_table is not None and b_table.has_column(col.name):
                    old = canonicalize_value(b_row[b_table.column_index(col.name)], col.dtype)
                if old != value:
                    changes.add(
                        DiffTuple(
                            table=a_table.name,
                            pk_column=pk_col.name,
                            pk_value=pk_value,
                            column=col.name,
                            value=value,
                        )
                    )
    return frozenset(changes)


def diff_to_json(diffs: frozenset[DiffTuple] | set[DiffTuple]) -> str:
    """Serialize a diff set as a JSON array of 5-element arrays, sorted."""
    ordered = sorted(diffs, key=diff_sort_key)
    return json.dumps([t.as_list() for t in ordered], ensure_ascii=False, indent=2)


def diff_from_json(text: str | bytes) -> frozenset[DiffTuple]:
    raw = json.loads(text)
    out = set()
    for item in raw:
        if not isinstance(item, list) or len(item) != 5:
            raise ValueError(f"diff entry must be a 5-element array, got {item!r}")
        table, pk_column, pk_value, column, value = item
        out.add(DiffTuple(table, pk_column, pk_value, column, value))
    return frozenset(out)
