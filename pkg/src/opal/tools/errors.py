"""Tool invocation errors. All inherit ToolError so callers can catch one type."""

from __future__ import annotations


class ToolError(Exception):
    """Base for every failure raised while invoking a tool."""


class ToolArgumentError(ToolError):
    """Arguments do not satisfy the tool signature or referenced schema."""


class BackendUnavailableError(ToolError):
    """The backend cannot serve requests (HTTP failure after retries)."""


class MalformedOutputError(ToolError):
    """The backend replied with something not parseable into the return kind."""


class FixtureMissingError(ToolError):
    """The mock backend has no fixture for this invocation and no fallback."""


class LinkingError(ToolError):
    """An entity mention could not be linked to any database row."""
