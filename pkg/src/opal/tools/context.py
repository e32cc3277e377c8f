"""Invocation context shared across tool calls in one plan execution."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Demonstration:
    """Example values drawn from the target database, shown to IE tools."""

    table: str
    column: str
    values: tuple[str | int | float, ...]

    def render(self) -> str:
        shown = ", ".join(str(v) for v in self.values)
        return f"{self.table}.{self.column}: {shown}"


@dataclass
class ToolContext:
    """Demonstrations, source documents, and an append-only invocation log."""

    demonstrations: list[Demonstration] = field(default_factory=list)
    documents: list[str] = field(default_factory=list)
    trace_sink: list | None = None

    def record(self, event: dict) -> None:
        if self.trace_sink is not None:
            self.trace_sink.append(event)
