"""Default entity linker: template sentences scored by token overlap.

Both the extracted mention and each candidate row are rendered through the
same sentence template, tokenized, and compared with the Dice coefficient.
No external model is involved, so linking is deterministic.
"""

from __future__ import annotations

import re

from opal.db import Database, Table, canonical_str, canonicalize_value

_TOKEN_RE = re.compile(r"[a-z0-9]+")

DEFAULT_LINK_THRESHOLD = 0.85


def label_column(table: Table) -> str:
    """The column used to name rows: the first text non-FK attribute, else the PK."""
    for col in table.columns:
        if col.is_primary_key or col.foreign_key is not None:
            continue
        if col.dtype == "text":
            return col.name
    return table.primary_key.name


def _tokens(value: object) -> frozenset[str]:
    return frozenset(_TOKEN_RE.findall(canonical_str(value).lower()))


def _render_sentence(table_name: str, value: object) -> frozenset[str]:
    # The template words cancel out of the score; they document the intent
    # of comparing "the <table> called <value>" on both sides.
    return _tokens(f"the {table_name} called {canonical_str(value)}")


def _dice(a: frozenset[str], b: frozenset[str]) -> float:
    if not a or not b:
        return 0.0
    return 2 * len(a & b) / (len(a) + len(b))


def score_mention(entry: object, table: Table, row: tuple) -> float:
    """Best overlap between the mention and the row's label or primary key."""
    label_i = table.column_index(label_column(table))
    mention = _render_sentence(table.name, entry)
    best = 0.0
    for cell in {row[label_i], row[table.pk_index]}:
        if cell is None:
            continue
        best = max(best, _dice(mention, _render_sentence(table.name, cell)))
    return best


def link_entities(
    data_entries: list,
    db: Database,
    table_name: str,
    threshold: float = DEFAULT_LINK_THRESHOLD,
) -> list[dict]:
    """Map each entry to at most one row: ``{"entry", "pk_value", "score"}``.

    An entry that equals an existing primary key (after canonicalization)
    links to that row with score 1.0; otherwise rows are scored by token
    overlap and the entry maps to none when the best score is below the
    threshold.
    """
    table = db.table(table_name)
    pk_dtype = table.primary_key.dtype
    out: list[dict] = []
    for entry in data_entries:
        pk_value = None
        score = 0.0
        try:
            as_pk = canonicalize_value(entry, pk_dtype)
        except Exception:
            as_pk = None
        if not _tokens(entry):
            # A mention with no content tokens cannot name a row; without
            # this, the shared template words alone would clear the bar.
            pass
        elif as_pk is not None and table.find_row(as_pk) is not None:
            pk_value, score = as_pk, 1.0
        else:
            for row in table.rows:
                row_score = score_mention(entry, table, row)
                if row_score > score:
                    score = row_score
                    pk_value = row[table.pk_index]
            if score < threshold:
                pk_value = None
        out.append({"entry": entry, "pk_value": pk_value, "score": round(score, 6)})
    return out
