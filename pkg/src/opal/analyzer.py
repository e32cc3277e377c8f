"""Plan vetting before real execution: static checks plus a simulated test.

Analysis never touches a remote backend. A plan is exercised against a
fabricated :class:`~opal.observer.MockInstance` whose tool fixtures stand
in for the external models; the outcome is compared against the mock's
intended updates. Findings come back as categorized
:class:`~opal.feedback.Feedback` the planner can revise against:

  syntax     parse diagnostics and static type errors
  logic      runtime failures and wrong simulated results (with evidence)
  integrity  commits the database layer would reject

Stages run in that order and analysis stops at the first stage that finds
anything — a plan that cannot typecheck produces noise, not signal, in a
simulated run. An empty return means the plan is cleared for execution.
"""

from __future__ import annotations

from opal.db import Database, canonical_str
from opal.executor import DEFAULT_TIMEOUT_S, execute
from opal.feedback import Feedback, render_feedback
from opal.observer import MockInstance, Observation
from opal.plan import Diagnostic, PlanProgram, Severity, typecheck
from opal.tools import MockBackend, RulesBackend

__all__ = [
    "Feedback",
    "render_feedback",
    "wrap_diagnostics",
    "run_simulated_test",
    "analyze",
]

# How many diff mismatches to spell out per simulated test before summarizing.
_MISMATCH_LIMIT = 8


def wrap_diagnostics(diagnostics: list[Diagnostic]) -> list[Feedback]:
    """Parse/typecheck errors as syntax Feedback; warnings are not findings."""
    return [
        Feedback("syntax", f"{d.code}: {d.message}", span=d.span)
        for d in diagnostics
        if d.severity is Severity.ERROR
    ]


def _diff_map(entries) -> dict:
    return {
        (e.table, e.pk_column, canonical_str(e.pk_value), e.column): e.value
        for e in entries
    }


def _cell(table: str, pk_column: str, pk_value: str, column: str) -> str:
    return f"{table}.{column} of the row with {pk_column} = {pk_value}"


def _compare_diffs(expected: frozenset, actual: frozenset) -> list[Feedback]:
    """Logic findings for every way the simulated diff misses the gold diff."""
    want, got = _diff_map(expected), _diff_map(actual)
    findings: list[Feedback] = []
    for key in sorted(set(want) | set(got)):
        table, pk_column, pk_value, column = key
        if key not in got:
            findings.append(
                Feedback(
                    "logic",
                    f"simulated test: the plan never set {_cell(*key)}",
                    evidence=(canonical_str(want[key]), "no update"),
                )
            )
        elif key not in want:
            findings.append(
                Feedback(
                    "logic",
                    f"simulated test: the plan set {_cell(*key)}, "
                    f"which the test does not expect",
                    evidence=("no update", canonical_str(got[key])),
                )
            )
        elif want[key] != got[key]:
            findings.append(
                Feedback(
                    "logic",
                    f"simulated test: wrong value for {_cell(*key)}",
                    evidence=(canonical_str(want[key]), canonical_str(got[key])),
                )
            )
    if len(findings) > _MISMATCH_LIMIT:
        shown = findings[:_MISMATCH_LIMIT]
        shown.append(
            Feedback(
                "logic",
                f"simulated test: {len(findings) - _MISMATCH_LIMIT} further "
                f"mismatches omitted",
                evidence=(f"{len(expected)} updates", f"{len(actual)} updates"),
            )
        )
        return shown
    return findings


def run_simulated_test(
    plan: PlanProgram,
    mock: MockInstance,
    db: Database | None = None,
    timeout_s: float = DEFAULT_TIMEOUT_S,
) -> tuple[tuple, list[Feedback]]:
    """Execute the plan over the mock and grade its diff against gold.

    Tool calls resolve from the mock's fixtures, falling back to the rule
    backend over the mock documents — never a remote model. Runtime and
    commit failures surface as the execution's own Feedback; a clean run
    with the wrong diff yields logic findings with (expected, actual)
    evidence. Returns (proposals, findings); ([], …) proposals on failure
    still show what the plan got as far as emitting.
    """
    backend = MockBackend(dict(mock.fixtures), fallback=RulesBackend())
    result = execute(
        plan,
        mock.database,
        list(mock.documents),
        backend,
        instruction=mock.instruction,
        timeout_s=timeout_s,
    )
    if result.feedback is not None:
        return result.proposals, [result.feedback]
    return result.proposals, _compare_diffs(frozenset(mock.gold_diff()), result.diff)


def analyze(
    plan: PlanProgram,
    db: Database,
    obs: Observation | None = None,
    mock: MockInstance | None = None,
    timeout_s: float = DEFAULT_TIMEOUT_S,
) -> list[Feedback]:
    """All findings for a parsed plan; empty means cleared for execution.

    Static typecheck findings (syntax category) preempt the simulated
    test; without a mock instance only the static stage runs. ``obs`` is
    accepted for signature parity with the pipeline but the analysis
    itself needs only the schema and the mock.
    """
    del obs  # the schema alone decides; profiles guide the planner instead
    static = wrap_diagnostics(typecheck(plan, db))
    if static or mock is None:
        return static
    _, findings = run_simulated_test(plan, mock, db, timeout_s=timeout_s)
    return findings
