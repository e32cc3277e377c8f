"""The registered tool signatures.

Kinds are coarse: text, integer, real, list, record, database. The plan
checker uses them statically; the hub re-validates actual values at
invocation time.
"""

from __future__ import annotations

from dataclasses import dataclass

from opal.db import Database


@dataclass(frozen=True)
class ToolSignature:
    name: str
    params: tuple[tuple[str, str], ...]  # ordered (name, kind)
    returns: str

    def param_kind(self, name: str) -> str | None:
        for key, kind in self.params:
            if key == name:
                return kind
        return None

    def param_names(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.params)


def _sig(name: str, params: list[tuple[str, str]], returns: str) -> ToolSignature:
    return ToolSignature(name, tuple(params), returns)


SIGNATURES: dict[str, ToolSignature] = {
    s.name: s
    for s in (
        # Information extraction
        _sig("NER", [("text", "text"), ("type", "text")], "list"),
        _sig("RE", [("text", "text"), ("head_e", "text"), ("relation", "text")], "list"),
        _sig("AE", [("text", "text"), ("entity", "text"), ("attribute_list", "list")], "record"),
        _sig("Classify", [("text", "text"), ("label_list", "list")], "text"),
        # Database integration
        _sig(
            "Link",
            [("data_entries", "list"), ("database", "database"), ("table_name", "text")],
            "list",
        ),
        _sig(
            "Norm",
            [("data_entries", "list"), ("database", "database"), ("table_name", "text")],
            "list",
        ),
        _sig(
            "DI",
            [("data_entry", "record"), ("database", "database"), ("table_name", "text")],
            "record",
        ),
        _sig(
            "PR",
            [("data_entries", "list"), ("database", "database"), ("table_name", "text")],
            "record",
        ),
        _sig(
            "AC",
            [
                ("data_entry", "record"),
                ("database", "database"),
                ("table_name", "text"),
                ("new_columns", "list"),
            ],
            "record",
        ),
    )
}

# The terminal operations: calls that produce database-update proposals.
TERMINAL_TOOLS = frozenset({"DI", "PR", "AC"})

# Tools answered by a backend (mock fixtures, rules, or a remote model).
BACKEND_TOOLS = frozenset({"NER", "RE", "AE", "Classify", "Norm"})


def runtime_kind(value: object) -> str:
    """The kind of an actual runtime value, for invocation-time checking."""
    if isinstance(value, bool):
        return "unknown"
    if isinstance(value, str):
        return "text"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, float):
        return "real"
    if isinstance(value, (list, tuple)):
        return "list"
    if isinstance(value, dict):
        return "record"
    if isinstance(value, Database):
        return "database"
    return "unknown"
