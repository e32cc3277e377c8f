"""Tool registry and backends: IE tools plus database-integration primitives."""

from .context import Demonstration, ToolContext
from .errors import (
    BackendUnavailableError,
    FixtureMissingError,
    LinkingError,
    MalformedOutputError,
    ToolArgumentError,
    ToolError,
)
from .hub import ToolHub
from .linker import DEFAULT_LINK_THRESHOLD, label_column, link_entities
from .mock import DATABASE_PLACEHOLDER, MockBackend, fixture_key, jsonable_args
from .normalizer import normalize, normalize_value
from .proposals import (
    build_add_columns_proposal,
    build_infill_proposal,
    build_insert_proposal,
    new_row_handle,
    parse_handle,
)
from .remote import RemoteBackend, build_prompt
from .rules import RulesBackend
from .signatures import (
    BACKEND_TOOLS,
    SIGNATURES,
    TERMINAL_TOOLS,
    ToolSignature,
    runtime_kind,
)

__all__ = [
    "BACKEND_TOOLS",
    "BackendUnavailableError",
    "DATABASE_PLACEHOLDER",
    "DEFAULT_LINK_THRESHOLD",
    "Demonstration",
    "FixtureMissingError",
    "LinkingError",
    "MalformedOutputError",
    "MockBackend",
    "RemoteBackend",
    "RulesBackend",
    "SIGNATURES",
    "TERMINAL_TOOLS",
    "ToolArgumentError",
    "ToolContext",
    "ToolError",
    "ToolHub",
    "ToolSignature",
    "build_add_columns_proposal",
    "build_infill_proposal",
    "build_insert_proposal",
    "build_prompt",
    "fixture_key",
    "jsonable_args",
    "label_column",
    "link_entities",
    "new_row_handle",
    "normalize",
    "normalize_value",
    "parse_handle",
    "runtime_kind",
]
