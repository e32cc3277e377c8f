"""Deterministic value normalization toward column dtypes.

Dates fold to ISO-8601, numbers lose currency symbols / separators /
magnitude words, text collapses whitespace. Unnormalizable values pass
through unchanged with a logged warning — extraction quality problems are
not this layer's to solve.
"""

from __future__ import annotations

import logging
import re
from datetime import datetime

from opal.db import Database

log = logging.getLogger(__name__)

_ISO_RE = re.compile(r"^(\d{4})-(\d{1,2})-(\d{1,2})(?:[T ].*)?$")
_ORDINAL_RE = re.compile(r"(\d{1,2})(st|nd|rd|th)\b", re.IGNORECASE)
_CURRENCY_RE = re.compile(r"[$€£¥]|(?:USD|EUR|GBP)\b", re.IGNORECASE)
_NUMBER_RE = re.compile(r"^([+-]?(?:\d[\d,_ ]*)?\.?\d+(?:[eE][+-]?\d+)?)\s*([A-Za-z]+)?\.?$")

_DATE_FORMATS = (
    "%B %d, %Y",  # July 21, 2023
    "%b %d, %Y",  # Jul 21, 2023
    "%B %d %Y",
    "%b %d %Y",
    "%d %B %Y",  # 21 July 2023
    "%d %b %Y",
    "%d %B, %Y",
    "%Y/%m/%d",
    "%Y.%m.%d",
    "%m/%d/%Y",  # US order; day-first inputs are out of scope
    "%B %Y",  # July 2023 -> first of month
    "%Y",
)

_MULTIPLIERS = {
    "k": 1e3,
    "thousand": 1e3,
    "m": 1e6,
    "mn": 1e6,
    "million": 1e6,
    "b": 1e9,
    "bn": 1e9,
    "billion": 1e9,
    "t": 1e12,
    "trillion": 1e12,
}


def _normalize_date(value: str) -> str | None:
    text = value.strip()
    m = _ISO_RE.match(text)
    if m:
        y, mo, d = (int(g) for g in m.groups())
        try:
            return datetime(y, mo, d).strftime("%Y-%m-%d")
        except ValueError:
            return None
    text = _ORDINAL_RE.sub(r"\1", text)
    for fmt in _DATE_FORMATS:
        try:
            return datetime.strptime(text, fmt).strftime("%Y-%m-%d")
        except ValueError:
            continue
    return None


def _normalize_number(value: object) -> float | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        return None
    text = _CURRENCY_RE.sub("", value).strip()
    text = text.rstrip("%").strip()
    m = _NUMBER_RE.match(text)
    if not m:
        return None
    digits, suffix = m.groups()
    try:
        number = float(digits.replace(",", "").replace("_", "").replace(" ", ""))
    except ValueError:
        return None
    if suffix:
        multiplier = _MULTIPLIERS.get(suffix.lower())
        if multiplier is None:
            return None
        number *= multiplier
    return number


def normalize_value(value: object, dtype: str) -> tuple[object, bool]:
    """(normalized value, True) — or (original, False) if no rule applies."""
    if value is None:
        return None, True
    if dtype == "date":
        if isinstance(value, str):
            iso = _normalize_date(value)
            if iso is not None:
                return iso, True
        return value, False
    if dtype == "integer":
        number = _normalize_number(value)
        if number is not None and abs(number - round(number)) < 1e-6:
            return int(round(number)), True
        return value, False
    if dtype == "real":
        number = _normalize_number(value)
        if number is not None:
            return number, True
        return value, False
    if dtype == "text":
        if isinstance(value, str):
            return re.sub(r"\s+", " ", value).strip(), True
        return str(value), True
    return value, False


def normalize(data_entries: list, db: Database, table_name: str) -> list:
    """Normalize ``{"column", "value"}`` entries toward their column dtypes."""
    table = db.table(table_name)
    out = []
    for entry in data_entries:
        if not isinstance(entry, dict) or "column" not in entry:
            log.warning("normalize: entry %r has no target column; passed through", entry)
            out.append(entry)
            continue
        column = entry["column"]
        if not table.has_column(column):
            log.warning("normalize: %s has no column %r; passed through", table_name, column)
            out.append(entry)
            continue
        value, ok = normalize_value(entry.get("value"), table.column(column).dtype)
        if not ok:
            log.warning(
                "normalize: %r does not normalize to %s for %s.%s",
                entry.get("value"),
                table.column(column).dtype,
                table_name,
                column,
            )
        out.append({"column": column, "value": value})
    return out
