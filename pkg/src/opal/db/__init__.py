"""Immutable relational database model with diffing and integrity checks."""

from .diff import DiffTuple, diff, diff_from_json, diff_sort_key, diff_to_json
from .io import DatabaseFormatError, database_to_dict, load_database, save_database
from .model import (
    Cell,
    DTYPES,
    ColumnCollisionError,
    ColumnDef,
    Database,
    DatabaseError,
    DtypeError,
    DuplicatePrimaryKeyError,
    ForeignKey,
    ForeignKeyViolationError,
    InvariantViolationError,
    OverwriteAttemptError,
    RowNotFoundError,
    SchemaCompatibilityError,
    SchemaError,
    Table,
    UnknownPrimaryKeyError,
    Violation,
    canonical_str,
    canonicalize_value,
    check_integrity,
    conforms,
    fk_topological_order,
    validate_schema,
)
from .mutations import add_columns, infill_cells, insert_rows, mint_primary_key

__all__ = [
    "Cell",
    "DTYPES",
    "ColumnCollisionError",
    "ColumnDef",
    "Database",
    "DatabaseError",
    "DatabaseFormatError",
    "DiffTuple",
    "DtypeError",
    "DuplicatePrimaryKeyError",
    "ForeignKey",
    "ForeignKeyViolationError",
    "InvariantViolationError",
    "OverwriteAttemptError",
    "RowNotFoundError",
    "SchemaCompatibilityError",
    "SchemaError",
    "Table",
    "UnknownPrimaryKeyError",
    "Violation",
    "add_columns",
    "canonical_str",
    "canonicalize_value",
    "check_integrity",
    "conforms",
    "database_to_dict",
    "diff",
    "diff_from_json",
    "diff_sort_key",
    "diff_to_json",
    "fk_topological_order",
    "infill_cells",
    "insert_rows",
    "load_database",
    "mint_primary_key",
    "save_database",
    "validate_schema",
]
