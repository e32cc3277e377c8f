"""Relational model: typed columns, tables, and integrity checking.

Databases are immutable values. Every mutation in :mod:`opal.db.mutations`
returns a new ``Database``; nothing in this package mutates in place, which
makes diffing, restarts, and simulated runs safe by construction.

Cell values are stored in canonical form (see :func:`canonicalize_value`):

* ``integer`` columns hold Python ``int``
* ``real`` columns hold Python ``float`` (shortest round-trip repr)
* ``date`` columns hold ISO-8601 ``YYYY-MM-DD`` strings
* ``text`` columns hold strings trimmed of leading/trailing whitespace
* NULL is Python ``None``

Construction performs only structural checks (valid dtype, exactly one
primary key). Data-level problems are deliberately representable so that
:func:`check_integrity` can report them as violations instead of raising.
"""

from __future__ import annotations

import datetime
import re
from dataclasses import dataclass, field, replace

DTYPES = ("text", "integer", "real", "date")

Cell = str | int | float | None

_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_INT_RE = re.compile(r"^[+-]?\d+$")
_REAL_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


class DatabaseError(Exception):
    """Base class for all database-layer errors."""


class SchemaError(DatabaseError):
    """Schema-level problem: unknown table/column, bad column definition."""


class DtypeError(DatabaseError):
    """A value does not conform to its column's dtype."""


class RowNotFoundError(DatabaseError):
    """No row with the requested primary-key value."""


class OverwriteAttemptError(DatabaseError):
    """Refusing to overwrite a non-NULL cell; only NULL cells may be filled."""


class DuplicatePrimaryKeyError(DatabaseError):
    """Insert would duplicate an existing primary-key value."""


class ForeignKeyViolationError(DatabaseError):
    """A foreign-key cell references a primary key that does not exist."""


class UnknownPrimaryKeyError(DatabaseError):
    """A values map references a primary-key value not present in the table."""


class ColumnCollisionError(SchemaError):
    """A new column name collides with an existing column."""


class SchemaCompatibilityError(DatabaseError):
    """The `after` database dropped a table or column present in `before`."""


class InvariantViolationError(DatabaseError):
    """A database value failed integrity checking.

    Carries the violation list so callers can report every finding.
    """

    def __init__(self, message: str, violations: "list[Violation]"):
        super().__init__(message)
        self.violations = violations


def canonicalize_value(value, dtype: str):
    """Return `value` in canonical form for `dtype`, or raise DtypeError.

    NULL (None) passes through unchanged. Integers accept ints and decimal
    strings; reals additionally accept floats; dates require ISO-8601
    strings (or date objects); text requires strings, which are trimmed.
    """
    if value is None:
        return None
    if dtype == "integer":
        if isinstance(value, bool):
            raise DtypeError(f"boolean {value!r} is not an integer")
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if isinstance(value, str) and _INT_RE.match(value.strip()):
            return int(value.strip())
        raise DtypeError(f"{value!r} does not conform to dtype integer")
    if dtype == "real":
        if isinstance(value, bool):
            raise DtypeError(f"boolean {value!r} is not a real")
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str) and _REAL_RE.match(value.strip()):
            return float(value.strip())
        raise DtypeError(f"{value!r} does not conform to dtype real")
    if dtype == "date":
        if isinstance(value, datetime.date) and not isinstance(value, datetime.datetime):
            return value.isoformat()
        if isinstance(value, str):
            text = value.strip()
            if _DATE_RE.match(text):
                try:
                    datetime.date.fromisoformat(text)
                except ValueError as exc:
                    raise DtypeError(f"{value!r} is not a valid calendar date") from exc
                return text
        raise DtypeError(f"{value!r} does not conform to dtype date (want YYYY-MM-DD)")
    if dtype == "text":
        if isinstance(value, str):
            return value.strip()
        raise DtypeError(f"{value!r} does not conform to dtype text")
    raise SchemaError(f"unknown dtype {dtype!r}")


def conforms(value, dtype: str) -> bool:
    """True if `value` canonicalizes under `dtype`."""
    try:
        canonicalize_value(value, dtype)
    except DatabaseError:
        return False
    return True


def canonical_str(value) -> str:
    """Deterministic string form of a canonical cell value.

    Used for sort keys and string-keyed maps; not a serialization format.
    """
    if value is None:
        return ""
    if isinstance(value, bool):
        return repr(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ForeignKey:
    """Reference to the primary-key column of another table."""

    table: str
    column: str


@dataclass(frozen=True)
class ColumnDef:
    name: str
    dtype: str
    is_primary_key: bool = False
    foreign_key: ForeignKey | None = None
    default: str | int | float | None = None
    nullable: bool = True

    def __post_init__(self):
        if self.dtype not in DTYPES:
            raise SchemaError(
                f"column {self.name!r}: unknown dtype {self.dtype!r} (expected one of {', '.join(DTYPES)})"
            )


@dataclass(frozen=True)
class Table:
    """A named table: ordered column definitions plus positional rows."""

    name: str
    columns: tuple[ColumnDef, ...]
    rows: tuple[tuple, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        pk_count = sum(1 for c in self.columns if c.is_primary_key)
        if pk_count != 1:
            raise SchemaError(
                f"table {self.name!r} must have exactly one primary-key column, found {pk_count}"
            )

    @property
    def primary_key(self) -> ColumnDef:
        return next(c for c in self.columns if c.is_primary_key)

    @property
    def pk_index(self) -> int:
        return next(i for i, c in enumerate(self.columns) if c.is_primary_key)

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise SchemaError(f"table {self.name!r} has no column {name!r}")

    def column(self, name: str) -> ColumnDef:
        return self.columns[self.column_index(name)]

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def find_row(self, pk_value) -> int | None:
        """Index of the row whose primary key equals `pk_value`, if any."""
        pk_dtype = self.primary_key.dtype
        try:
            needle = canonicalize_value(pk_value, pk_dtype)
        except DatabaseError:
            return None
        idx = self.pk_index
        for i, row in enumerate(self.rows):
            if row[idx] == needle:
                return i
        return None

    def column_values(self, name: str) -> list:
        i = self.column_index(name)
        return [row[i] for row in self.rows]


@dataclass(frozen=True)
class Database:
    """An immutable collection of named tables."""

    tables: tuple[Table, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tables", tuple(self.tables))
        seen = set()
        for t in self.tables:
            if t.name in seen:
                raise SchemaError(f"duplicate table name {t.name!r}")
            seen.add(t.name)

    @property
    def table_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tables)

    def has_table(self, name: str) -> bool:
        return any(t.name == name for t in self.tables)

    def table(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise SchemaError(f"no table named {name!r}")

    def replace_table(self, table: Table) -> "Database":
        """New database with `table` substituted for its same-named entry."""
        if not self.has_table(table.name):
            raise SchemaError(f"no table named {table.name!r}")
        return Database(tuple(table if t.name == table.name else t for t in self.tables))


def validate_schema(db: Database) -> None:
    """Raise SchemaError on structural problems the type system cannot catch.

    Checks duplicate column names, foreign keys that do not point at an
    existing table's primary-key column, defaults that do not conform to
    their dtype, and cycles in the table-level foreign-key graph.
    """
    for table in db.tables:
        seen = set()
        for col in table.columns:
            if col.name in seen:
                raise SchemaError(f"table {table.name!r}: duplicate column {col.name!r}")
            seen.add(col.name)
            if col.default is not None and not conforms(col.default, col.dtype):
                raise SchemaError(
                    f"table {table.name!r} column {col.name!r}: default {col.default!r} "
                    f"does not conform to dtype {col.dtype}"
                )
            fk = col.foreign_key
            if fk is not None:
                if not db.has_table(fk.table):
                    raise SchemaError(
                        f"table {table.name!r} column {col.name!r}: foreign key references "
                        f"missing table {fk.table!r}"
                    )
                target = db.table(fk.table)
                if not target.has_column(fk.column) or not target.column(fk.column).is_primary_key:
                    raise SchemaError(
                        f"table {table.name!r} column {col.name!r}: foreign key must reference "
                        f"the primary-key column of {fk.table!r}"
                    )
        for row_i, row in enumerate(table.rows):
            if len(row) != len(table.columns):
                raise SchemaError(
                    f"table {table.name!r} row {row_i}: {len(row)} cells for "
                    f"{len(table.columns)} columns"
                )
    fk_topological_order(db)


def fk_topological_order(db: Database) -> list[str]:
    """Table names ordered parents-first along foreign-key edges.

    Raises SchemaError if the table-level FK graph has a cycle (including
    self references); commit ordering relies on acyclicity.
    """
    deps: dict[str, set[str]] = {t.name: set() for t in db.tables}
    for table in db.tables:
        for col in table.columns:
            if col.foreign_key is not None and col.foreign_key.table in deps:
                deps[table.name].add(col.foreign_key.table)
    order: list[str] = []
    state: dict[str, int] = {}  # 1 = visiting, 2 = done

    def visit(name: str) -> None:
        if state.get(name) == 2:
            return
        if state.get(name) == 1:
            raise SchemaError(f"foreign-key cycle involving table {name!r}")
        state[name] = 1
        for parent in sorted(deps[name]):
            visit(parent)
        state[name] = 2
        order.append(name)

    for t in db.tables:
        visit(t.name)
    return order


@dataclass(frozen=True)
class Violation:
    """One data-level integrity finding.

    kind is one of ``duplicate-pk``, ``dangling-fk``, ``dtype-mismatch``.
    """

    kind: str
    table: str
    row_index: int
    column: str
    message: str


def check_integrity(db: Database) -> list[Violation]:
    """Report every data-level invariant violation; empty list means clean.

    Detects duplicate or NULL primary keys, dangling foreign-key cells,
    and cells that do not conform to their column dtype (including NULL
    in non-nullable columns).
    """
    violations: list[Violation] = []
    pk_values: dict[str, set] = {}
    for table in db.tables:
        idx = table.pk_index
        vals = set()
        for row in table.rows:
            if len(row) > idx and conforms(row[idx], table.primary_key.dtype):
                v = canonicalize_value(row[idx], table.primary_key.dtype)
                if v is not None:
                    vals.add(v)
        pk_values[table.name] = vals

    for table in db.tables:
        seen_pks = set()
        for row_i, row in enumerate(table.rows):
            if len(row) != len(table.columns):
                violations.append(
                    Violation(
                        kind="dtype-mismatch",
                        table=table.name,
                        row_index=row_i,
                        column=table.columns[0].name,
                        message=f"row has {len(row)} cells for {len(table.columns)} columns",
                    )
                )
                continue
            for col_i, col in enumerate(table.columns):
                value = row[col_i]
                if value is None:
                    if col.is_primary_key or not col.nullable:
                        violations.append(
                            Violation(
                                kind="dtype-mismatch",
                                table=table.name,
                                row_index=row_i,
                                column=col.name,
                                message=f"NULL in non-nullable column {col.name!r}",
                            )
                        )
                    continue
                if not conforms(value, col.dtype):
                    violations.append(
                        Violation(
                            kind="dtype-mismatch",
                            table=table.name,
                            row_index=row_i,
                            column=col.name,
                            message=f"{value!r} does not conform to dtype {col.dtype}",
                        )
                    )
                    continue
                canon = canonicalize_value(value, col.dtype)
                if col.is_primary_key:
                    if canon in seen_pks:
                        violations.append(
                            Violation(
                                kind="duplicate-pk",
                                table=table.name,
                                row_index=row_i,
                                column=col.name,
                                message=f"duplicate primary key {canon!r}",
                            )
                        )
                    seen_pks.add(canon)
                fk = col.foreign_key
                if fk is not None and fk.table in pk_values:
                    target_dtype = None
                    target = db.table(fk.table)
                    if target.has_column(fk.column):
                        target_dtype = target.column(fk.column).dtype
                    try:
                        ref = canonicalize_value(value, target_dtype) if target_dtype else canon
                    except DatabaseError:
                        ref = canon
                    if ref not in pk_values[fk.table]:
                        violations.append(
                            Violation(
                                kind="dangling-fk",
                                table=table.name,
                                row_index=row_i,
                                column=col.name,
                                message=f"{canon!r} not found in {fk.table}.{fk.column}",
                            )
                        )
    return violations


def canonicalize_table(table: Table) -> Table:
    """Table with every cell in canonical form. Cells must conform."""
    new_rows = []
    for row in table.rows:
        new_rows.append(
            tuple(canonicalize_value(v, c.dtype) for v, c in zip(row, table.columns))
        )
    return replace(table, rows=tuple(new_rows))


def canonicalize_database(db: Database) -> Database:
    return Database(tuple(canonicalize_table(t) for t in db.tables))
