"""Tool dispatch: signature validation, local tools, backend tools, tracing.

Link, DI, PR, and AC always run locally (the linker and proposal builders
are deterministic); NER, RE, AE, Classify, and Norm go to the configured
backend. Every invocation is validated against its signature and appended
to the context's trace sink.
"""

from __future__ import annotations

import time

from .context import ToolContext
from .errors import MalformedOutputError, ToolArgumentError
from .linker import DEFAULT_LINK_THRESHOLD, link_entities
from .mock import fixture_key, jsonable_args
from .proposals import (
    build_add_columns_proposal,
    build_infill_proposal,
    build_insert_proposal,
)
from .signatures import SIGNATURES, runtime_kind


class ToolHub:
    """Immutable after construction; safe to share across executions."""

    def __init__(self, backend, link_threshold: float = DEFAULT_LINK_THRESHOLD) -> None:
        self.backend = backend
        self.link_threshold = link_threshold

    def validate_args(self, tool: str, args: dict) -> None:
        sig = SIGNATURES.get(tool)
        if sig is None:
            raise ToolArgumentError(f"{tool!r} is not a registered tool")
        for name in args:
            if sig.param_kind(name) is None:
                raise ToolArgumentError(
                    f"{tool} has no parameter {name!r} (takes: {', '.join(sig.param_names())})"
                )
        for name, kind in sig.params:
            if name not in args:
                raise ToolArgumentError(f"call to {tool} is missing argument {name!r}")
            actual = runtime_kind(args[name])
            if actual != kind:
                raise ToolArgumentError(
                    f"{tool} argument {name!r}: expected {kind}, found {actual}"
                )

    def invoke(self, tool: str, args: dict, ctx: ToolContext) -> object:
        self.validate_args(tool, args)
        started = time.perf_counter()
        if tool == "Link":
            result = link_entities(
                args["data_entries"], args["database"], args["table_name"], self.link_threshold
            )
            backend_served = False
        elif tool == "DI":
            result = build_infill_proposal(
                args["data_entry"], args["database"], args["table_name"], self.link_threshold
            )
            backend_served = False
        elif tool == "PR":
            result = build_insert_proposal(
                args["data_entries"], args["database"], args["table_name"]
            )
            backend_served = False
        elif tool == "AC":
            result = build_add_columns_proposal(
                args["data_entry"],
                args["database"],
                args["table_name"],
                args["new_columns"],
                self.link_threshold,
            )
            backend_served = False
        else:
            result = self.backend.call(tool, args, ctx)
            backend_served = True
            expected = SIGNATURES[tool].returns
            actual = runtime_kind(result)
            if actual != expected:
                raise MalformedOutputError(
                    f"{tool} backend returned a {actual} value; signature promises {expected}"
                )
        ctx.record(
            {
                "event": "invoke",
                "tool": tool,
                "key": fixture_key(tool, args),
                "args": jsonable_args(args),
                "backend": backend_served,
                "result": result,
                "latency_ms": round((time.perf_counter() - started) * 1000, 3),
            }
        )
        return result
