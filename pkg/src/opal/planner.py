"""Plan generation and the revise/restart loop.

Three interchangeable plan sources feed the loop, all callables from a
:class:`PlannerContext` to plan source text:

  * :class:`TemplatePlanner` — the deterministic baseline. One NER pass to
    find entity mentions, one AE pass over the remaining columns, then the
    terminal operation matching the instruction's task type.
  * :class:`LLMPlanner` — asks a remote model over HTTP, prompt built from
    tool docs, worked examples, the observation, and accumulated feedback.
  * :class:`ScriptedPlanner` — replays a fixed list of texts; the replay
    and stub-testing vehicle.

The loop's budget is two-level: a run is one initial generation plus up to
``max_revisions`` feedback-driven revisions; when a run is spent, a
restart wipes the feedback history and begins fresh, up to ``max_restarts``
times. With the defaults (10 revisions, 2 restarts) a planner can therefore
produce at most 3 × 11 = 33 plans before the loop gives up and returns a
failure report.
"""

from __future__ import annotations

import json
import re

from dataclasses import dataclass, field

import httpx

from opal.analyzer import wrap_diagnostics
from opal.db import Database
from opal.feedback import Feedback, render_feedback
from opal.observer import Observation, analyze_schema, entity_type_word
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
    ToolCall,
    VarRef,
    format_plan,
    parse,
)
from opal.tools import SIGNATURES
from opal.tools.errors import BackendUnavailableError

DEFAULT_MAX_REVISIONS = 10
DEFAULT_MAX_RESTARTS = 2
DEFAULT_PLANNER_MODEL = "gpt-4-1106-preview"

TASK_TYPES = ("DI", "RP", "CA")

_IDENT = re.compile(r"[A-Za-z_]\w*")
_COLUMN_SPEC = re.compile(r"\b([A-Za-z_]\w*)\s*\(\s*(integer|real|text|date)\s*\)")
_FENCE = re.compile(r"```(?:plan)?\s*\n(.*?)```", re.S)


class PlannerError(Exception):
    """The planner cannot produce a plan for structural reasons."""


class NoTargetTableError(PlannerError):
    """The instruction does not identify a table of the database."""


class PlannerFailure(PlannerError):
    """Budget exhausted; carries the failure report."""

    def __init__(self, report: "FailureReport"):
        super().__init__(report.reason)
        self.report = report


# ---------------------------------------------------------------------------
# Instruction reading
# ---------------------------------------------------------------------------

_CA_CUES = ("add a column", "add columns", "new column", "add the column", "extra column")
_DI_CUES = ("fill", "missing", "complete", "infill", "update the", "null")
_RP_CUES = ("insert", "add", "new entries", "populate", "append", "register")


def detect_task_type(instruction: str) -> str:
    """DI / RP / CA from instruction phrasing.

    Column-addition cues are checked first since such instructions usually
    also say "add" and "fill". Unmatched instructions default to DI, the
    least destructive reading.
    """
    low = instruction.lower()
    if any(cue in low for cue in _CA_CUES):
        return "CA"
    if any(cue in low for cue in _DI_CUES):
        return "DI"
    if any(cue in low for cue in _RP_CUES):
        return "RP"
    return "DI"


def parse_new_columns(instruction: str) -> list[tuple[str, str]]:
    """``Name (dtype)`` mentions, in order, deduplicated — the CA column list."""
    seen: dict[str, str] = {}
    for name, dtype in _COLUMN_SPEC.findall(instruction):
        seen.setdefault(name, dtype)
    return list(seen.items())


def find_target_table(instruction: str, db: Database) -> str:
    """Earliest table named in the instruction; longer names win ties."""
    low = instruction.lower()
    hits = []
    for table in db.tables:
        pattern = rf"\b{re.escape(table.name.lower())}\b"
        match = re.search(pattern, low)
        if match:
            hits.append((match.start(), -len(table.name), table.name))
    if hits:
        return min(hits)[2]
    if len(db.tables) == 1:
        return db.tables[0].name
    raise NoTargetTableError(
        f"instruction names none of the tables {[t.name for t in db.tables]}: "
        f"{instruction!r}"
    )


# ---------------------------------------------------------------------------
# Template planner
# ---------------------------------------------------------------------------


def _attr_fields(names: list[str]) -> tuple[tuple[str, FieldAccess], ...]:
    return tuple((n, FieldAccess(VarRef("attrs"), n)) for n in names)


def _terminal_call(
    task: str,
    target: str,
    row_key: str,
    attrs: list[str],
    new_columns: list[tuple[str, str]],
) -> ToolCall:
    tail = (("database", VarRef("database")), ("table_name", Literal(target)))
    if task == "DI":
        entry = RecordExpr((("entity", VarRef("name")),) + _attr_fields(attrs))
        return ToolCall("DI", (("data_entry", entry),) + tail)
    if task == "RP":
        row = RecordExpr(((row_key, VarRef("name")),) + _attr_fields(attrs))
        return ToolCall("PR", (("data_entries", ListExpr((row,))),) + tail)
    values = RecordExpr(_attr_fields(attrs))
    entry = RecordExpr((("entity", VarRef("name")), ("values", values)))
    specs = ListExpr(
        tuple(
            RecordExpr((("name", Literal(n)), ("dtype", Literal(d))))
            for n, d in new_columns
        )
    )
    return ToolCall("AC", (("data_entry", entry),) + tail + (("new_columns", specs),))


def plan_template(instruction: str, db: Database, obs: Observation) -> PlanProgram:
    """The fixed-shape baseline plan for the instruction's task and table.

    Per document: NER for the target table's entity type, then (unless the
    table is all-key) one AE over the relevant columns, then the matching
    terminal operation. The result always typechecks against ``db``.
    """
    task = detect_task_type(instruction)
    target = find_target_table(instruction, db)
    profile = obs.table(target)
    entity = profile.entity_column

    new_columns: list[tuple[str, str]] = []
    if task == "CA":
        new_columns = parse_new_columns(instruction)
        if not new_columns:
            raise PlannerError(
                f"column-addition instruction without 'Name (dtype)' specs: {instruction!r}"
            )
        attrs = [n for n, _ in new_columns]
    else:
        attrs = [
            c.name
            for c in profile.columns
            if not c.is_primary_key and c.name != entity and _IDENT.fullmatch(c.name)
        ]

    if task == "RP":
        pk = next(c.name for c in profile.columns if c.is_primary_key)
        row_key = entity if entity and _IDENT.fullmatch(entity) else pk
    else:
        row_key = "entity"

    inner: list = []
    if attrs:
        inner.append(
            Let(
                "attrs",
                ToolCall(
                    "AE",
                    (
                        ("text", VarRef("doc")),
                        ("entity", VarRef("name")),
                        ("attribute_list", ListExpr(tuple(Literal(a) for a in attrs))),
                    ),
                ),
            )
        )
    inner.append(Emit(_terminal_call(task, target, row_key, attrs, new_columns)))

    per_doc = (
        Let(
            "names",
            ToolCall(
                "NER",
                (("text", VarRef("doc")), ("type", Literal(entity_type_word(target)))),
            ),
        ),
        ForEach("name", VarRef("names"), tuple(inner)),
    )
    header = f"{task} plan for table {target}: extract entities, then their attributes."
    return PlanProgram(
        (
            Comment(header),
            ForEach("doc", VarRef("documents"), per_doc),
        )
    )


# ---------------------------------------------------------------------------
# Prompting
# ---------------------------------------------------------------------------

_TOOL_BLURBS = {
    "NER": "mentions of the given entity type in the text",
    "RE": "tail entities related to head_e by the relation",
    "AE": "the listed attributes of one entity, as a record",
    "Classify": "the best-fitting label from label_list",
    "Link": "match each entry to a row of the table (pk_value per entry)",
    "Norm": "rewrite entries into the column's canonical format",
    "DI": "propose filling NULL cells of one existing row",
    "PR": "propose inserting new rows",
    "AC": "propose adding new columns, with per-row values",
}

_DEMONSTRATIONS = (
    (
        "DI",
        """\
# Fill missing attributes of existing movies.
for doc in documents {
    let names = NER(text = doc, type = "movie")
    for name in names {
        let attrs = AE(text = doc, entity = name, attribute_list = ["Budget", "Genre"])
        emit DI(data_entry = {"entity": name, "Budget": attrs.Budget, "Genre": attrs.Genre}, database = database, table_name = "Movie")
    }
}
""",
    ),
    (
        "RP",
        """\
# Insert one row per movie described in the documents.
for doc in documents {
    let names = NER(text = doc, type = "movie")
    for name in names {
        let attrs = AE(text = doc, entity = name, attribute_list = ["Budget"])
        emit PR(data_entries = [{"Name": name, "Budget": attrs.Budget}], database = database, table_name = "Movie")
    }
}
""",
    ),
    (
        "CA",
        """\
# Add a Rating column and fill it for the movies the documents mention.
for doc in documents {
    let names = NER(text = doc, type = "movie")
    for name in names {
        let attrs = AE(text = doc, entity = name, attribute_list = ["Rating"])
        emit AC(data_entry = {"entity": name, "values": {"Rating": attrs.Rating}}, database = database, table_name = "Movie", new_columns = [{"name": "Rating", "dtype": "real"}])
    }
}
""",
    ),
)


def default_system_prompt() -> str:
    lines = [
        "You update a relational database by writing a short plan in a",
        "restricted language. Statements: `let NAME = EXPR`, `for NAME in",
        "LIST { ... }`, `emit TERMINAL(...)`, and `#` comments. Expressions",
        "are literals, lists, records with quoted keys, variables, field",
        "access, and keyword-only tool calls.",
        "",
        "Tools:",
    ]
    for sig in SIGNATURES.values():
        params = ", ".join(f"{n}: {k}" for n, k in sig.params)
        lines.append(f"  {sig.name}({params}) -> {sig.returns} — {_TOOL_BLURBS[sig.name]}")
    lines += [
        "",
        "Only DI, PR and AC may be emitted; everything else is read-only.",
        "The initial bindings are `database`, `documents` (list of text)",
        "and `instruction`. Reply with the plan only.",
    ]
    for task, text in _DEMONSTRATIONS:
        lines += ["", f"Example ({task}):", text.rstrip()]
    return "\n".join(lines) + "\n"


def build_planner_prompt(
    ctx: "PlannerContext", documents: list[str] | None = None, max_doc_chars: int = 400
) -> str:
    """System prompt + observation + instruction + feedback, Figure-style."""
    parts = [ctx.system_prompt, "## Database\n" + ctx.observation.render()]
    if documents:
        clips = "\n---\n".join(doc[:max_doc_chars] for doc in documents[:5])
        parts.append("## Document excerpts\n" + clips)
    parts.append("## Instruction\n" + ctx.instruction)
    for i, (text, findings) in enumerate(ctx.feedback_history, start=1):
        parts.append(
            f"## Attempt {i}\n{text.rstrip()}\n\nFeedback:\n"
            + render_feedback(list(findings))
        )
    parts.append("## Your plan")
    return "\n\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# Context and budget
# ---------------------------------------------------------------------------


@dataclass
class PlannerContext:
    """Mutable state of one planning session.

    ``feedback_history`` holds the current run's (plan text, findings)
    pairs and is wiped by restarts; ``archive`` accumulates across the
    whole session for the failure report. ``session`` is the JSON-lines
    event log.
    """

    instruction: str
    observation: Observation
    system_prompt: str = field(default_factory=default_system_prompt)
    feedback_history: list = field(default_factory=list)
    revision_index: int = 0
    restart_index: int = 0
    max_revisions: int = DEFAULT_MAX_REVISIONS
    max_restarts: int = DEFAULT_MAX_RESTARTS
    generations: int = 0
    session: list = field(default_factory=list)
    archive: list = field(default_factory=list)

    def log(self, event: str, **data) -> None:
        entry = {"event": event, "restart": self.restart_index, "revision": self.revision_index}
        entry.update(data)
        self.session.append(entry)

    def session_jsonl(self) -> str:
        return "".join(
            json.dumps(e, ensure_ascii=False, sort_keys=True) + "\n" for e in self.session
        )

    def record_feedback(self, plan_text: str, findings: list[Feedback], stage: str) -> None:
        pair = (plan_text, tuple(findings))
        self.feedback_history.append(pair)
        self.archive.append(pair)
        self.log("feedback", stage=stage, findings=[f.to_dict() for f in findings])

    def spend_revision(self) -> bool:
        """Consume one revision; False when the run's budget is gone."""
        if self.revision_index >= self.max_revisions:
            return False
        self.revision_index += 1
        return True

    def restart(self) -> bool:
        """Begin a fresh run with cleared feedback; False when none remain."""
        if self.restart_index >= self.max_restarts:
            return False
        self.restart_index += 1
        self.revision_index = 0
        self.feedback_history.clear()
        self.log("restart")
        return True


@dataclass(frozen=True)
class FailureReport:
    """Why planning gave up, with the full cross-run history."""

    reason: str
    generations: int
    restarts_used: int
    history: tuple = ()

    def render(self) -> str:
        lines = [
            f"planning failed: {self.reason} "
            f"({self.generations} plans over {self.restarts_used + 1} runs)"
        ]
        for i, (text, findings) in enumerate(self.history, start=1):
            lines.append(f"--- attempt {i} ---")
            lines.append(text.rstrip())
            lines.append(render_feedback(list(findings)))
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "reason": self.reason,
            "generations": self.generations,
            "restarts_used": self.restarts_used,
            "history": [
                {"plan": text, "findings": [f.to_dict() for f in findings]}
                for text, findings in self.history
            ],
        }


def _report(ctx: PlannerContext, reason: str) -> FailureReport:
    return FailureReport(
        reason=reason,
        generations=ctx.generations,
        restarts_used=ctx.restart_index,
        history=tuple(ctx.archive),
    )


# ---------------------------------------------------------------------------
# Generation loop
# ---------------------------------------------------------------------------


def _next_plan(ctx: PlannerContext, generate) -> tuple[PlanProgram, str]:
    """Generate until a plan parses; parse failures spend the same budget."""
    while True:
        text = generate(ctx)
        ctx.generations += 1
        ctx.log("generate", n=ctx.generations, text=text)
        result = parse(text)
        if result.ok:
            return result.program, text
        ctx.record_feedback(text, wrap_diagnostics(result.diagnostics), stage="parse")
        if ctx.spend_revision() or ctx.restart():
            continue
        raise PlannerFailure(_report(ctx, "no syntactically valid plan within budget"))


def plan_llm(ctx: PlannerContext, generate) -> PlanProgram:
    """The next parseable plan from a generator; raises PlannerFailure."""
    return _next_plan(ctx, generate)[0]


@dataclass(frozen=True)
class ReviseOutcome:
    """What the revise loop produced: a database, or a failure report."""

    database: Database | None
    diff: frozenset
    plan: PlanProgram | None
    plan_text: str | None
    generations: int
    restarts_used: int
    report: FailureReport | None = None
    execution: object | None = None

    @property
    def ok(self) -> bool:
        return self.report is None


def revise_loop(ctx: PlannerContext, generate, analyze_fn, execute_fn) -> ReviseOutcome:
    """plan → analyze → execute, revising on findings, restarting on spent runs.

    ``analyze_fn(program) -> list[Feedback]`` and ``execute_fn(program) ->
    ExecutionResult`` are injected so the loop itself stays backend-
    agnostic. Success requires an execution whose commit passed integrity;
    the loop then stops immediately.
    """
    try:
        while True:
            program, text = _next_plan(ctx, generate)
            findings = list(analyze_fn(program))
            stage = "analyze"
            execution = None
            if not findings:
                execution = execute_fn(program)
                if execution.ok:
                    ctx.log("accept", generations=ctx.generations)
                    return ReviseOutcome(
                        database=execution.database,
                        diff=execution.diff,
                        plan=program,
                        plan_text=text,
                        generations=ctx.generations,
                        restarts_used=ctx.restart_index,
                        execution=execution,
                    )
                findings = [execution.feedback]
                stage = "execute"
            ctx.record_feedback(text, findings, stage=stage)
            if ctx.spend_revision() or ctx.restart():
                continue
            report = _report(ctx, "revision and restart budget exhausted")
            ctx.log("fail", reason=report.reason, generations=ctx.generations)
            return ReviseOutcome(
                database=None,
                diff=frozenset(),
                plan=None,
                plan_text=None,
                generations=ctx.generations,
                restarts_used=ctx.restart_index,
                report=report,
            )
    except PlannerFailure as fail:
        ctx.log("fail", reason=fail.report.reason, generations=ctx.generations)
        return ReviseOutcome(
            database=None,
            diff=frozenset(),
            plan=None,
            plan_text=None,
            generations=ctx.generations,
            restarts_used=ctx.restart_index,
            report=fail.report,
        )


# ---------------------------------------------------------------------------
# Plan sources
# ---------------------------------------------------------------------------


@dataclass
class TemplatePlanner:
    """Deterministic baseline: the template plan, same text every time."""

    db: Database
    obs: Observation | None = None

    def __call__(self, ctx: PlannerContext) -> str:
        obs = self.obs if self.obs is not None else ctx.observation
        if obs is None:
            obs = analyze_schema(self.db)
        return format_plan(plan_template(ctx.instruction, self.db, obs))


@dataclass
class ScriptedPlanner:
    """Replays fixed plan texts, one per generation; the stub/replay source."""

    scripts: tuple
    repeat_last: bool = True
    calls: int = 0

    def __post_init__(self):
        self.scripts = tuple(self.scripts)
        if not self.scripts:
            raise PlannerError("ScriptedPlanner needs at least one script")

    def __call__(self, ctx: PlannerContext) -> str:
        index = self.calls
        if index >= len(self.scripts):
            if not self.repeat_last:
                raise PlannerError(f"script exhausted after {len(self.scripts)} plans")
            index = len(self.scripts) - 1
        self.calls += 1
        return self.scripts[index]


def replies_from_session(events: list[dict]) -> list[str]:
    """The generated plan texts of a session log, for scripted replay."""
    return [e["text"] for e in events if e.get("event") == "generate"]


class LLMPlanner:
    """Remote-model plan source speaking the same JSON shape as the tool
    backend: POST {model, prompt, system} -> {"output": text}.

    Markdown code fences around the reply are tolerated and stripped.
    Transient HTTP failures (5xx, connection errors) are retried; anything
    else raises BackendUnavailableError.
    """

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        model: str = DEFAULT_PLANNER_MODEL,
        timeout: float = 60.0,
        http_retries: int = 2,
        include_documents: bool = False,
        documents: tuple[str, ...] = (),
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.include_documents = include_documents
        self.documents = tuple(documents)
        self.http_retries = http_retries
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def __call__(self, ctx: PlannerContext) -> str:
        docs = list(self.documents) if self.include_documents else None
        prompt = build_planner_prompt(ctx, documents=docs)
        ctx.log("prompt", text=prompt)
        body = {"model": self.model, "prompt": prompt, "system": ctx.system_prompt}
        reply = self._post(body)
        return extract_plan_text(reply)

    def _post(self, body: dict) -> str:
        last_error: Exception | None = None
        for _ in range(self.http_retries + 1):
            try:
                response = self._client.post(self.endpoint, json=body)
            except httpx.ConnectError as err:
                last_error = err
                continue
            if response.status_code >= 500:
                last_error = RuntimeError(f"server error {response.status_code}")
                continue
            if response.status_code >= 400:
                raise BackendUnavailableError(
                    f"planner endpoint rejected the request: {response.status_code}"
                )
            payload = response.json()
            if "output" not in payload:
                raise BackendUnavailableError("planner reply carries no 'output' field")
            return str(payload["output"])
        raise BackendUnavailableError(f"planner endpoint unreachable: {last_error}")


def extract_plan_text(reply: str) -> str:
    """Plan source from a model reply, unwrapping one markdown fence if any."""
    match = _FENCE.search(reply)
    text = match.group(1) if match else reply
    return text.strip() + "\n"
