"""Plan interpreter: evaluate statements, collect proposals, commit atomically.

Execution has two phases. The evaluation phase walks the statements in
order, calling tools through the hub and accumulating the proposals that
``emit`` statements produce — the database value never changes during this
phase. The commit phase then applies all proposals through the db-core
mutation primitives: column additions first, then row insertions in
foreign-key topological order (resolving ``@new:`` handles to freshly
minted primary keys), then infills.

Because databases are immutable values, atomicity is structural: any
failure simply returns the input database untouched, wrapped in a
:class:`~opal.feedback.Feedback` the revise loop can show the planner.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from opal.db import (
    ColumnDef,
    Database,
    DatabaseError,
    ForeignKey,
    add_columns,
    canonicalize_value,
    check_integrity,
    diff,
    fk_topological_order,
    infill_cells,
    insert_rows,
    mint_primary_key,
)
from opal.feedback import Feedback
from opal.plan import (
    Comment,
    Emit,
    FieldAccess,
    ForEach,
    Let,
    ListExpr,
    Literal,
    PlanProgram,
    RecordExpr,
    Span,
    ToolCall,
    VarRef,
)
from opal.tools import (
    TERMINAL_TOOLS,
    ToolContext,
    ToolError,
    ToolHub,
    parse_handle,
    runtime_kind,
)

DEFAULT_TIMEOUT_S = 300.0


@dataclass(frozen=True)
class ExecutionTrace:
    """Ordered event log of one execution; JSON-lines serializable."""

    events: tuple[dict, ...] = ()

    def to_jsonl(self, include_timing: bool = True) -> str:
        """One JSON object per line; timing fields are droppable so that
        identical runs serialize byte-identically."""
        events = self.events
        if not include_timing:
            events = tuple(
                {k: v for k, v in e.items() if k != "latency_ms"} for e in events
            )
        return "".join(json.dumps(e, ensure_ascii=False, sort_keys=True) + "\n" for e in events)

    def fixtures(self) -> dict:
        """Backend replies keyed for the mock backend; replays this run."""
        return {
            e["key"]: e["result"]
            for e in self.events
            if e.get("event") == "invoke" and e.get("backend")
        }


@dataclass(frozen=True)
class ExecutionResult:
    """Outcome envelope: on failure, `database` is the untouched input."""

    database: Database
    diff: frozenset
    trace: ExecutionTrace
    proposals: tuple[dict, ...] = ()
    feedback: Feedback | None = None

    @property
    def ok(self) -> bool:
        return self.feedback is None


class _Abort(Exception):
    def __init__(self, feedback: Feedback):
        super().__init__(feedback.message)
        self.feedback = feedback


def _logic(message: str, span: Span | None = None, evidence=None) -> _Abort:
    return _Abort(Feedback("logic", message, span=span, evidence=evidence))


def _integrity(message: str, span: Span | None = None) -> _Abort:
    return _Abort(Feedback("integrity", message, span=span))


class _Interpreter:
    def __init__(self, db: Database, hub: ToolHub, ctx: ToolContext, deadline: float, events: list):
        self.db = db
        self.hub = hub
        self.ctx = ctx
        self.deadline = deadline
        self.events = events
        self.scopes: list[dict] = []
        self.proposals: list[tuple[dict, Span | None]] = []

    # -- environment ------------------------------------------------------

    def lookup(self, name: str, span: Span | None):
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        raise _logic(f"variable {name!r} is not bound", span)

    def _tick(self, span: Span | None) -> None:
        if time.monotonic() > self.deadline:
            raise _logic("execution exceeded its wall-clock budget", span)

    # -- statements -------------------------------------------------------

    def run_block(self, statements, bindings: dict) -> None:
        self.scopes.append(bindings)
        try:
            for stmt in statements:
                self._tick(stmt.span)
                if isinstance(stmt, Comment):
                    continue
                if isinstance(stmt, Let):
                    value = self.eval(stmt.value)
                    self.scopes[-1][stmt.name] = value
                    self.events.append(
                        {"event": "bind", "name": stmt.name, "kind": runtime_kind(value)}
                    )
                elif isinstance(stmt, ForEach):
                    iterable = self.eval(stmt.iterable)
                    if not isinstance(iterable, (list, tuple)):
                        raise _logic(
                            f"for-loop iterable is a {runtime_kind(iterable)}, not a list",
                            stmt.span,
                        )
                    self.events.append(
                        {"event": "foreach", "var": stmt.var, "size": len(iterable)}
                    )
                    for item in iterable:
                        self._tick(stmt.span)
                        self.run_block(stmt.body, {stmt.var: item})
                elif isinstance(stmt, Emit):
                    if stmt.call.tool not in TERMINAL_TOOLS:
                        raise _logic(
                            f"emit requires a terminal operation, got {stmt.call.tool}",
                            stmt.span,
                        )
                    proposal = self.eval(stmt.call)
                    self.proposals.append((proposal, stmt.span))
                    self.events.append({"event": "emit", "proposal": proposal})
                else:  # pragma: no cover - the AST has no other statements
                    raise _logic(f"unsupported statement {type(stmt).__name__}", stmt.span)
        finally:
            self.scopes.pop()

    # -- expressions ------------------------------------------------------

    def eval(self, expr):
        if isinstance(expr, Literal):
            return expr.value
        if isinstance(expr, ListExpr):
            return [self.eval(item) for item in expr.items]
        if isinstance(expr, RecordExpr):
            return {key: self.eval(value) for key, value in expr.fields}
        if isinstance(expr, VarRef):
            return self.lookup(expr.name, expr.span)
        if isinstance(expr, FieldAccess):
            base = self.eval(expr.base)
            if not isinstance(base, dict):
                raise _logic(
                    f"field access .{expr.key} on a {runtime_kind(base)}, not a record",
                    expr.span,
                )
            # Missing fields read as NULL: extraction tools legitimately
            # return partial records, and proposal builders drop NULLs.
            return base.get(expr.key)
        if isinstance(expr, ToolCall):
            args = {name: self.eval(value) for name, value in expr.args}
            try:
                return self.hub.invoke(expr.tool, args, self.ctx)
            except ToolError as err:
                raise _logic(
                    f"{expr.tool} failed: {err}",
                    expr.span,
                    evidence=("a successful tool call", f"{type(err).__name__}: {err}"),
                )
        raise _logic(f"unsupported expression {type(expr).__name__}", getattr(expr, "span", None))


# ---------------------------------------------------------------------------
# Commit
# ---------------------------------------------------------------------------


def _column_def(spec: dict) -> ColumnDef:
    fk = spec.get("fk")
    return ColumnDef(
        name=spec["name"],
        dtype=spec["dtype"],
        default=spec.get("default"),
        nullable=spec.get("nullable", True),
        foreign_key=ForeignKey(fk["table"], fk["column"]) if fk else None,
    )


def _merge_add_columns(proposals: list[tuple[dict, Span | None]]) -> dict:
    """Per-table merged AC proposals; column lists must agree exactly."""
    merged: dict[str, dict] = {}
    for proposal, span in proposals:
        table = proposal["table"]
        if table not in merged:
            merged[table] = {"columns": proposal["columns"], "values": {}, "span": span}
        elif merged[table]["columns"] != proposal["columns"]:
            raise _logic(
                f"conflicting column lists in add-column proposals for table {table!r}",
                span,
                evidence=(
                    json.dumps(merged[table]["columns"], sort_keys=True),
                    json.dumps(proposal["columns"], sort_keys=True),
                ),
            )
        for pk_value, cells in proposal["values"].items():
            bucket = merged[table]["values"].setdefault(pk_value, {})
            for column, value in cells.items():
                if column in bucket and bucket[column] != value:
                    raise _logic(
                        f"two proposals set {table}.{column} for key {pk_value!r} "
                        f"to different values",
                        span,
                        evidence=(repr(bucket[column]), repr(value)),
                    )
                bucket[column] = value
    return merged


def _check_proposal_columns(table, cells: dict, kind: str, span: Span | None) -> None:
    for name in cells:
        if not table.has_column(name):
            raise _logic(
                f"{kind} proposal names {table.name}.{name}, which does not exist "
                f"(even after pending column additions)",
                span,
                evidence=(f"an existing column of {table.name!r}", repr(name)),
            )


def _resolve(value, minted: dict, span: Span | None):
    handle = parse_handle(value)
    if handle is None:
        return value
    table, index = handle
    rows = minted.get(table, [])
    if index >= len(rows):
        raise _integrity(
            f"handle {value!r} references new row {index} of {table!r}, "
            f"but only {len(rows)} rows were proposed",
            span,
        )
    return rows[index]


def commit_proposals(db: Database, proposals: list[tuple[dict, Span | None]]) -> Database:
    """Apply proposals in dependency order; raises _Abort on any rejection.

    Order: add-column proposals first (merged per table), then insertions
    parents-before-children, then infills in emission order. Raising leaves
    `db` untouched — it is an immutable value.
    """
    inserts: dict[str, list[tuple[dict, Span | None]]] = {}
    infills: list[tuple[dict, Span | None]] = []
    adds: list[tuple[dict, Span | None]] = []
    for proposal, span in proposals:
        kind = proposal.get("kind")
        if kind == "add_columns":
            adds.append((proposal, span))
        elif kind == "insert":
            inserts.setdefault(proposal["table"], []).append((proposal, span))
        elif kind == "infill":
            infills.append((proposal, span))
        else:
            raise _logic(f"unknown proposal kind {kind!r}", span)

    out = db
    try:
        merged_adds = _merge_add_columns(adds)
        for table in sorted(merged_adds):
            merged = merged_adds[table]
            out = add_columns(
                out, table, [_column_def(c) for c in merged["columns"]], merged["values"]
            )

        # Pre-mint primary keys so "@new:Table:i" handles are resolvable
        # even before the referenced row is physically inserted. Column
        # names are checked here, against the post-AC schema.
        minted: dict[str, list] = {}
        ordered = [t for t in fk_topological_order(out) if t in inserts]
        pending: dict[str, list] = {}
        for table_name in ordered:
            table = out.table(table_name)
            pk = table.primary_key
            taken = {canonicalize_value(row[table.pk_index], pk.dtype) for row in table.rows}
            minted[table_name] = []
            pending[table_name] = []
            for proposal, span in inserts[table_name]:
                for row_spec in proposal["rows"]:
                    _check_proposal_columns(table, row_spec, "insert", span)
                    spec = dict(row_spec)
                    if spec.get(pk.name) is not None:
                        pk_value = canonicalize_value(spec[pk.name], pk.dtype)
                    else:
                        pk_value = mint_primary_key(table, taken)
                    spec[pk.name] = pk_value
                    taken.add(pk_value)
                    minted[table_name].append(pk_value)
                    pending[table_name].append((spec, span))
        for table_name in ordered:
            rows = [
                {k: _resolve(v, minted, span) for k, v in spec.items()}
                for spec, span in pending[table_name]
            ]
            out = insert_rows(out, table_name, rows)

        for proposal, span in infills:
            _check_proposal_columns(out.table(proposal["table"]), proposal["updates"], "infill", span)
            updates = {k: _resolve(v, minted, span) for k, v in proposal["updates"].items()}
            out = infill_cells(
                out, proposal["table"], _resolve(proposal["pk_value"], minted, span), updates
            )
    except DatabaseError as err:
        raise _integrity(str(err))

    violations = check_integrity(out)
    if violations:
        shown = "; ".join(v.message for v in violations[:3])
        raise _integrity(f"commit would violate integrity: {shown}")
    return out


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def execute(
    plan: PlanProgram,
    db: Database,
    documents: list[str],
    backend,
    ctx: ToolContext | None = None,
    instruction: str = "",
    timeout_s: float = DEFAULT_TIMEOUT_S,
) -> ExecutionResult:
    """Run a cleared plan against a backend and commit its proposals.

    `backend` is a tool backend (mock / rules / remote) or an already
    configured :class:`ToolHub`. On any runtime or integrity failure the
    result carries the input database unchanged plus one Feedback.
    """
    hub = backend if isinstance(backend, ToolHub) else ToolHub(backend)
    events: list[dict] = []
    run_ctx = ToolContext(
        demonstrations=list(ctx.demonstrations) if ctx else [],
        documents=list(documents),
        trace_sink=events,
    )
    interp = _Interpreter(db, hub, run_ctx, time.monotonic() + timeout_s, events)
    bindings = {
        "database": db,
        "documents": list(documents),
        "instruction": instruction,
    }
    try:
        interp.run_block(plan.statements, bindings)
        final = commit_proposals(db, interp.proposals)
    except _Abort as abort:
        events.append({"event": "abort", "feedback": abort.feedback.to_dict()})
        return ExecutionResult(
            database=db,
            diff=frozenset(),
            trace=ExecutionTrace(tuple(events)),
            proposals=tuple(p for p, _ in interp.proposals),
            feedback=abort.feedback,
        )
    changed = diff(db, final)
    events.append({"event": "commit", "changes": len(changed)})
    return ExecutionResult(
        database=final,
        diff=changed,
        trace=ExecutionTrace(tuple(events)),
        proposals=tuple(p for p, _ in interp.proposals),
    )
