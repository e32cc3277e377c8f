"""Categorized findings shared by the analyzer and the executor.

Three categories, fixed: ``syntax`` (static plan problems), ``logic``
(behavior diverging from expectation, always backed by evidence from a
simulated or real run), and ``integrity`` (database-constraint rejections).
"""

from __future__ import annotations

from dataclasses import dataclass

from opal.plan import Span

CATEGORIES = ("syntax", "logic", "integrity")


@dataclass(frozen=True)
class Feedback:
    """One finding, rendered into the planner's revision prompt."""

    category: str
    message: str
    span: Span | None = None
    evidence: tuple[str, str] | None = None  # (expected, actual)

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown feedback category {self.category!r}")

    def render(self) -> str:
        where = f" (line {self.span.line}, col {self.span.column})" if self.span else ""
        text = f"[{self.category}]{where} {self.message}"
        if self.evidence is not None:
            expected, actual = self.evidence
            text += f"\n  expected: {expected}\n  actual: {actual}"
        return text

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "message": self.message,
            "span": (
                {"line": self.span.line, "column": self.span.column, "length": self.span.length}
                if self.span
                else None
            ),
            "evidence": list(self.evidence) if self.evidence else None,
        }


def render_feedback(feedbacks: list[Feedback]) -> str:
    """The combined text block appended to a planner context on revision."""
    if not feedbacks:
        return "No findings."
    return "\n".join(f.render() for f in feedbacks)
