"""Rule-based tool backend: offline, deterministic pattern heuristics.

The rules target plainly-worded factual prose of the shape the observer's
mock documents use — "X is a <type>." for entity mentions and
"The <attribute> of X is <value>." for attributes and relations. That keeps
simulated tests self-contained: no fixture, no network, same answer every
run.
"""

from __future__ import annotations

import re

from .context import ToolContext
from .errors import ToolArgumentError
from .normalizer import normalize

# A proper-noun span: capitalized words (digits and connectives allowed inside).
_NAME = r"[A-Z0-9][\w'&.-]*(?:\s+(?:of|the|and|[A-Z0-9][\w'&.-]*))*"


def _sentences(text: str) -> list[str]:
    return [s.strip() for s in re.split(r"(?<=[.!?])\s+|\n+", text) if s.strip()]


def _dedupe(values: list[str]) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for v in values:
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out


def _clean_value(raw: str) -> str:
    value = raw.strip().rstrip(".!?").strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        value = value[1:-1]
    return value.strip()


def ner(text: str, entity_type: str) -> list[str]:
    """Names introduced as the given type: "<Name> is a <type> ..."."""
    found: list[str] = []
    type_re = re.escape(entity_type.strip())
    # Keywords and the type word match case-insensitively; the name itself
    # must be capitalized, so the (?i:...) scope excludes the name group.
    patterns = (
        rf"\b({_NAME})\s+(?i:is\s+(?:a|an|the)\s+{type_re})\b",
        rf"\b(?i:the\s+{type_re}\s+named)\s+({_NAME})",
        rf"\b(?i:the\s+{type_re})\s+({_NAME})",
    )
    for pattern in patterns:
        for m in re.finditer(pattern, text):
            found.append(m.group(1).strip().rstrip(".,;:!?"))
    return _dedupe(found)


def attribute_value(text: str, entity: str, attribute: str) -> str | None:
    """The <attribute> of <entity> per "The A of E is V." style sentences."""
    entity_re = re.escape(entity.strip())
    attr_re = re.escape(attribute.strip()).replace("_", "[_ ]")
    patterns = (
        rf"\bthe\s+{attr_re}\s+of\s+{entity_re}\s+(?:is|was|are|were)\s+(.+?)[.!?](?:\s|$)",
        rf"\b{entity_re}'s\s+{attr_re}\s+(?:is|was|are|were)\s+(.+?)[.!?](?:\s|$)",
        rf"\b{entity_re}\s+has\s+(?:a|an)\s+{attr_re}\s+of\s+(.+?)[.!?](?:\s|$)",
    )
    for pattern in patterns:
        m = re.search(pattern, text, re.IGNORECASE)
        if m:
            return _clean_value(m.group(1))
    return None


def ae(text: str, entity: str, attribute_list: list) -> dict:
    out: dict[str, object] = {}
    for attribute in attribute_list:
        value = attribute_value(text, entity, str(attribute))
        if value is not None:
            out[str(attribute)] = value
    return out


def re_extract(text: str, head_e: str, relation: str) -> list[str]:
    """Tail mentions for (head, relation, ?): reuses the attribute patterns."""
    single = attribute_value(text, head_e, relation)
    if single is None:
        return []
    parts = re.split(r",\s*|\s+and\s+", single)
    return _dedupe([p.strip() for p in parts if p.strip()])


def classify(text: str, label_list: list) -> str:
    """Most frequent label mention; ties and zero counts take list order."""
    if not label_list:
        raise ToolArgumentError("Classify needs at least one label")
    best_label, best_count = str(label_list[0]), -1
    for label in label_list:
        count = len(re.findall(rf"\b{re.escape(str(label))}\b", text, re.IGNORECASE))
        if count > best_count:
            best_label, best_count = str(label), count
    return best_label


class RulesBackend:
    """Serves the backend-emulated tools with the heuristics above."""

    name = "rules"

    def call(self, tool: str, args: dict, ctx: ToolContext) -> object:
        if tool == "NER":
            return ner(args["text"], args["type"])
        if tool == "RE":
            return re_extract(args["text"], args["head_e"], args["relation"])
        if tool == "AE":
            return ae(args["text"], args["entity"], list(args["attribute_list"]))
        if tool == "Classify":
            return classify(args["text"], list(args["label_list"]))
        if tool == "Norm":
            return normalize(list(args["data_entries"]), args["database"], args["table_name"])
        raise ToolArgumentError(f"rules backend does not serve tool {tool!r}")
