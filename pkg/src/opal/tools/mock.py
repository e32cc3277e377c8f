"""Fixture-driven mock backend: canonical (tool, args) keys to canned replies.

Database-valued arguments serialize as the placeholder ``"<database>"`` so a
fixture recorded against one database state replays against another. With a
fallback backend configured, misses are served by the fallback instead of
failing — the analyzer runs mocks-over-rules this way.
"""

from __future__ import annotations

import json
from pathlib import Path

from opal.db import Database

from .context import ToolContext
from .errors import FixtureMissingError

DATABASE_PLACEHOLDER = "<database>"


def jsonable_args(args: dict) -> dict:
    """Arguments with any Database value replaced by the placeholder."""
    out = {}
    for name, value in args.items():
        out[name] = DATABASE_PLACEHOLDER if isinstance(value, Database) else value
    return out


def fixture_key(tool: str, args: dict) -> str:
    """Canonical JSON key for one invocation, independent of database state."""
    return json.dumps(
        {"tool": tool, "args": jsonable_args(args)},
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )


class MockBackend:
    """Replays fixtures exactly; bit-deterministic by construction."""

    name = "mock"

    def __init__(self, fixtures: dict[str, object] | None = None, fallback=None) -> None:
        self.fixtures = dict(fixtures or {})
        self.fallback = fallback

    @classmethod
    def from_file(cls, path: str | Path, fallback=None) -> MockBackend:
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh), fallback=fallback)

    def call(self, tool: str, args: dict, ctx: ToolContext) -> object:
        key = fixture_key(tool, args)
        if key in self.fixtures:
            return self.fixtures[key]
        if self.fallback is not None:
            return self.fallback.call(tool, args, ctx)
        raise FixtureMissingError(f"no fixture for {key}")
