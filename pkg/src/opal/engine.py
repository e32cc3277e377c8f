"""End-to-end pipeline for one task instance.

``run_instance`` wires the stages together: observe the database, fabricate
a mock for simulated testing, pick a plan source, then drive the
revise/restart loop where each candidate plan is analyzed against the mock
and — once clear — executed against the configured tool backend.

Plan source selection: an instance that ships its own ``plan.plan`` text is
replayed as scripted (multi-table plans beyond the template's reach);
otherwise a configured LLM endpoint is asked; otherwise the deterministic
template. Tool backends: ``mock`` replays the instance's recorded
fixtures (rule fallback for anything unrecorded), ``rules`` runs the
offline heuristics, ``remote`` calls the configured HTTP model server.
"""

from __future__ import annotations

from dataclasses import dataclass

from opal.analyzer import analyze
from opal.config import ConfigError, EngineConfig
from opal.db import Database
from opal.evaluation import TaskInstance
from opal.executor import ExecutionResult, execute
from opal.observer import (
    Observation,
    analyze_schema,
    generate_mock_instance,
    select_demonstrations,
)
from opal.planner import (
    LLMPlanner,
    NoTargetTableError,
    PlannerContext,
    PlannerError,
    ReviseOutcome,
    ScriptedPlanner,
    TemplatePlanner,
    FailureReport,
    find_target_table,
    parse_new_columns,
    revise_loop,
)
from opal.tools import MockBackend, RemoteBackend, RulesBackend, ToolContext, ToolHub


@dataclass(frozen=True)
class EngineResult:
    """What one pipeline run produced, success or not."""

    instance_id: str
    outcome: ReviseOutcome
    observation: Observation
    context: PlannerContext

    @property
    def ok(self) -> bool:
        return self.outcome.ok

    @property
    def database(self) -> Database | None:
        return self.outcome.database

    @property
    def diff(self) -> frozenset:
        return self.outcome.diff

    @property
    def execution(self) -> ExecutionResult | None:
        return self.outcome.execution


def build_backend(config: EngineConfig, instance: TaskInstance):
    if config.backend == "mock":
        return MockBackend(dict(instance.fixtures), fallback=RulesBackend())
    if config.backend == "rules":
        return RulesBackend()
    if not config.llm_endpoint:
        raise ConfigError("remote backend requires an endpoint (OPAL_LLM_ENDPOINT)")
    return RemoteBackend(
        endpoint=config.llm_endpoint,
        api_key=config.llm_api_key,
        model=config.llm_model,
    )


def _plan_source(instance: TaskInstance, config: EngineConfig, obs: Observation):
    if instance.plan_text:
        return ScriptedPlanner([instance.plan_text])
    if config.llm_endpoint:
        return LLMPlanner(
            endpoint=config.llm_endpoint,
            api_key=config.llm_api_key,
            model=config.llm_model,
        )
    return TemplatePlanner(instance.db_before, obs)


def _demonstrations(instance: TaskInstance, target: str | None, config: EngineConfig):
    if target is None:
        return []
    table = instance.db_before.table(target)
    return [
        select_demonstrations(
            instance.db_before, target, col.name, k=config.demo_k, seed=config.seed
        )
        for col in table.columns
    ]


def run_instance(instance: TaskInstance, config: EngineConfig | None = None) -> EngineResult:
    """Observe → plan → analyze → execute for one instance.

    Planner-level failures (budget exhausted, no identifiable target
    table) come back as a failed outcome with a report, never as an
    exception; configuration problems do raise.
    """
    config = config or EngineConfig()
    db = instance.db_before
    obs = analyze_schema(db, categorical_k=config.categorical_k)

    try:
        target = find_target_table(instance.instruction, db)
    except NoTargetTableError:
        target = None
    # A pinned plan is trusted prose-wise: the single-table mock cannot
    # stand in for arbitrary handwritten plans (they may touch several
    # tables), so simulation is skipped and only the static checks plus
    # execution-time integrity remain.
    mock = None
    if not instance.plan_text:
        mock = generate_mock_instance(
            db, instance.task_type, table_name=target, seed=config.seed,
            categorical_k=config.categorical_k,
            new_columns=(
                parse_new_columns(instance.instruction)
                if instance.task_type == "CA" else None
            ),
        )

    hub = ToolHub(build_backend(config, instance), link_threshold=config.link_threshold)
    tool_ctx = ToolContext(demonstrations=_demonstrations(instance, target, config))
    ctx = PlannerContext(
        instruction=instance.instruction,
        observation=obs,
        max_revisions=config.max_revisions,
        max_restarts=config.max_restarts,
    )

    def analyze_fn(program):
        return analyze(program, db, obs, mock, timeout_s=config.exec_timeout_s)

    def execute_fn(program):
        return execute(
            program,
            db,
            list(instance.documents),
            hub,
            ctx=tool_ctx,
            instruction=instance.instruction,
            timeout_s=config.exec_timeout_s,
        )

    try:
        outcome = revise_loop(ctx, _plan_source(instance, config, obs), analyze_fn, execute_fn)
    except PlannerError as err:
        report = FailureReport(
            reason=f"{type(err).__name__}: {err}",
            generations=ctx.generations,
            restarts_used=ctx.restart_index,
            history=tuple(ctx.archive),
        )
        ctx.log("fail", reason=report.reason)
        outcome = ReviseOutcome(
            database=None,
            diff=frozenset(),
            plan=None,
            plan_text=None,
            generations=ctx.generations,
            restarts_used=ctx.restart_index,
            report=report,
        )
    return EngineResult(
        instance_id=instance.id, outcome=outcome, observation=obs, context=ctx
    )


def benchmark_system(config: EngineConfig | None = None):
    """A ``run_benchmark`` system callable: instance -> predicted diff."""

    def system(instance: TaskInstance):
        result = run_instance(instance, config)
        if not result.ok:
            raise PlannerError(result.outcome.report.reason)
        return result.diff

    return system
