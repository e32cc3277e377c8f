"""Remote LLM backend: one HTTP POST per invocation.

Request body: ``{"model", "tool", "args", "demonstrations", "prompt"}``.
The reply must be JSON ``{"output": <value>}`` with the value matching the
tool's return kind. A malformed reply triggers exactly one reprompt; HTTP
and connection failures are retried before giving up.
"""

from __future__ import annotations

import json
import threading

import httpx

from opal.db import database_to_dict, Database

from .context import ToolContext
from .errors import BackendUnavailableError, MalformedOutputError
from .signatures import SIGNATURES, runtime_kind

DEFAULT_MODEL = "gpt-4-1106-preview"

_PROMPT_TEMPLATES = {
    "NER": "Extract every entity of type {type!r} mentioned in the text. Reply with"
    ' JSON {{"output": [names...]}}.',
    "RE": "Find every value related to {head_e!r} by the relation {relation!r}."
    ' Reply with JSON {{"output": [values...]}}.',
    "AE": "For the entity {entity!r}, extract the attributes {attribute_list!r} from"
    ' the text. Reply with JSON {{"output": {{attribute: value}}}}.',
    "Classify": "Pick the single best label for the text from {label_list!r}."
    ' Reply with JSON {{"output": "label"}}.',
    "Norm": "Normalize each entry's value to the format of its target column in"
    ' table {table_name!r}. Reply with JSON {{"output": [entries...]}}.',
}


def build_prompt(tool: str, args: dict, demonstrations: list) -> str:
    template = _PROMPT_TEMPLATES.get(tool, 'Reply with JSON {{"output": ...}}.')
    safe = {k: v for k, v in args.items() if not isinstance(v, Database)}
    instruction = template.format_map({**{"text": ""}, **safe})
    lines = [f"Tool: {tool}", instruction]
    if demonstrations:
        lines.append("Examples of values already in the database:")
        lines.extend(f"  {demo.render()}" for demo in demonstrations)
    text = args.get("text")
    if isinstance(text, str):
        lines.append("Text:")
        lines.append(text)
    return "\n".join(lines)


class RemoteBackend:
    """HTTP client for an LLM service emulating the IE tools."""

    name = "remote"

    def __init__(
        self,
        endpoint: str,
        api_key: str = "",
        model: str = DEFAULT_MODEL,
        *,
        timeout: float = 60.0,
        max_in_flight: int = 4,
        http_retries: int = 2,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self.http_retries = http_retries
        self._semaphore = threading.Semaphore(max_in_flight)
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(headers=headers, timeout=timeout, transport=transport)

    def close(self) -> None:
        self._client.close()

    def _post(self, body: dict) -> str:
        last_error: Exception | None = None
        for _ in range(self.http_retries + 1):
            try:
                response = self._client.post(self.endpoint, json=body)
                if response.status_code >= 500:
                    last_error = BackendUnavailableError(
                        f"{self.endpoint} answered {response.status_code}"
                    )
                    continue
                if response.status_code != 200:
                    raise BackendUnavailableError(
                        f"{self.endpoint} answered {response.status_code}: {response.text[:200]}"
                    )
                return response.text
            except httpx.HTTPError as err:
                last_error = err
        raise BackendUnavailableError(f"{self.endpoint} unreachable: {last_error}")

    def call(self, tool: str, args: dict, ctx: ToolContext) -> object:
        wire_args = {
            name: database_to_dict(value) if isinstance(value, Database) else value
            for name, value in args.items()
        }
        body = {
            "model": self.model,
            "tool": tool,
            "args": wire_args,
            "demonstrations": [
                {"table": d.table, "column": d.column, "values": list(d.values)}
                for d in ctx.demonstrations
            ],
            "prompt": build_prompt(tool, args, ctx.demonstrations),
        }
        with self._semaphore:
            reply = self._post(body)
            output = self._parse(tool, reply)
            if output is _PARSE_FAILED:
                # One reprompt: repeat the request with an explicit format reminder.
                body = dict(body, prompt=body["prompt"] + "\nYour previous reply was not"
                            ' valid JSON of the form {"output": ...}. Reply again.')
                reply = self._post(body)
                output = self._parse(tool, reply)
                if output is _PARSE_FAILED:
                    raise MalformedOutputError(
                        f"{tool}: backend reply is not parseable: {reply[:200]}"
                    )
        return output

    def _parse(self, tool: str, reply: str) -> object:
        try:
            doc = json.loads(reply)
        except ValueError:
            return _PARSE_FAILED
        if not isinstance(doc, dict) or "output" not in doc:
            return _PARSE_FAILED
        output = doc["output"]
        expected = SIGNATURES[tool].returns
        if runtime_kind(output) != expected:
            return _PARSE_FAILED
        return output


_PARSE_FAILED = object()
