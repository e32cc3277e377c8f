"""Scoring, difficulty classification, and benchmark runs.

An update is correct when all five fields of its :class:`DiffTuple` match
a gold tuple exactly; per-instance precision/recall/F1 over those sets is
averaged (macro) across instances. Benchmark reports slice the average by
difficulty, task type, and database source.

Difficulty bands are a three-way split on (number of tables touched,
number of changed values, average words per document): any of
(>1 table, >20 values, >2000 words) makes an instance Hard; within one
table, ≤10 values and ≤1000 words is Easy; everything between is Medium.
The bands as published leave gaps (1 table, 5 values, 1500 words matches
no band literally), so Hard is checked first and Easy requires both
bounds — the remainder is Medium, making the classifier total.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from opal.db import (
    Database,
    DiffTuple,
    check_integrity,
    diff,
    diff_sort_key,
    load_database,
)

TASK_TYPES = ("DI", "RP", "CA")
DIFFICULTIES = ("Easy", "Medium", "Hard")


class InstanceLoadError(Exception):
    """An instance directory or manifest is malformed; carries the path."""


# ---------------------------------------------------------------------------
# Task instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaskInstance:
    """One benchmark item: update ``db_before`` per ``instruction``.

    ``domain`` names the source database family and is the "DB Source"
    axis of reports. ``fixtures`` optionally carries recorded tool replies
    so the instance runs offline against the mock backend; ``plan_text``
    optionally pins a handwritten plan, bypassing plan generation.
    """

    id: str
    instruction: str
    documents: tuple[str, ...]
    db_before: Database
    db_gold: Database | None
    task_type: str
    domain: str = "unspecified"
    fixtures: dict = field(default_factory=dict)
    plan_text: str | None = None

    def __post_init__(self):
        if self.task_type not in TASK_TYPES:
            raise ValueError(f"task_type must be one of {TASK_TYPES}, got {self.task_type!r}")
        if self.db_gold is not None:
            violations = check_integrity(self.db_gold)
            if violations:
                raise ValueError(
                    f"gold database of {self.id!r} violates integrity: "
                    f"{violations[0].message}"
                )
            if not diff(self.db_before, self.db_gold):
                raise ValueError(f"gold database of {self.id!r} changes nothing")

    def gold_diff(self) -> frozenset:
        if self.db_gold is None:
            raise ValueError(f"instance {self.id!r} has no gold database")
        return diff(self.db_before, self.db_gold)

    def avg_doc_words(self) -> float:
        if not self.documents:
            return 0.0
        return sum(len(doc.split()) for doc in self.documents) / len(self.documents)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InstanceScore:
    precision: float
    recall: float
    f1: float
    matched: int
    predicted: int
    gold: int

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "matched": self.matched,
            "predicted": self.predicted,
            "gold": self.gold,
        }


def as_diff_set(entries) -> frozenset:
    """DiffTuples from an iterable of DiffTuples or 5-element sequences."""
    out = set()
    for entry in entries:
        if isinstance(entry, DiffTuple):
            out.add(entry)
        else:
            table, pk_column, pk_value, column, value = entry
            out.add(DiffTuple(table, pk_column, pk_value, column, value))
    return frozenset(out)


def score_instance(predicted, gold) -> InstanceScore:
    """Exact-match P/R/F1 between predicted and gold update sets.

    Membership is 5-field equality; values are compared as the canonical
    forms the diff operation emits. An empty prediction against non-empty
    gold (and vice versa) scores zero across the board.
    """
    pred = as_diff_set(predicted)
    want = as_diff_set(gold)
    matched = len(pred & want)
    precision = matched / len(pred) if pred else 0.0
    recall = matched / len(want) if want else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if (precision + recall) > 0
        else 0.0
    )
    return InstanceScore(
        precision=precision,
        recall=recall,
        f1=f1,
        matched=matched,
        predicted=len(pred),
        gold=len(want),
    )


def macro_f1(scores) -> float:
    """Arithmetic mean of per-instance F1. Rejects an empty list."""
    values = [s.f1 if isinstance(s, InstanceScore) else float(s) for s in scores]
    if not values:
        raise ValueError("macro_f1 of an empty score list is undefined")
    return sum(values) / len(values)


def classify_difficulty(n_tables: int, delta_values: int, avg_doc_words: float) -> str:
    """Easy / Medium / Hard per the banding rules in the module docstring."""
    if n_tables < 0 or delta_values < 0 or avg_doc_words < 0:
        raise ValueError("difficulty inputs must be non-negative")
    if n_tables > 1 or delta_values > 20 or avg_doc_words > 2000:
        return "Hard"
    if delta_values <= 10 and avg_doc_words <= 1000:
        return "Easy"
    return "Medium"


def instance_difficulty(instance: TaskInstance) -> str:
    gold = instance.gold_diff()
    n_tables = len({t.table for t in gold})
    return classify_difficulty(n_tables, len(gold), instance.avg_doc_words())


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as err:
        raise InstanceLoadError(f"cannot read {path}: {err.strerror or err}") from err


def load_instance(
    directory: str | Path,
    instance_id: str | None = None,
    task_type: str | None = None,
    domain: str = "unspecified",
) -> TaskInstance:
    """An instance from its directory layout.

    Expected: ``instruction.txt``, ``docs/*.txt`` (document order is the
    filename sort), ``before.json``; optional ``gold.json``,
    ``fixtures.json``, and ``plan.plan``. Task type defaults to a keyword
    reading of the instruction.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise InstanceLoadError(f"not an instance directory: {directory}")
    instruction = _read(directory / "instruction.txt").strip()
    documents = tuple(
        _read(doc_path)
        for doc_path in sorted((directory / "docs").glob("*.txt"))
    )
    db_before = load_database(_read(directory / "before.json"))
    gold_path = directory / "gold.json"
    db_gold = load_database(_read(gold_path)) if gold_path.exists() else None
    fixtures_path = directory / "fixtures.json"
    fixtures = json.loads(_read(fixtures_path)) if fixtures_path.exists() else {}
    plan_path = directory / "plan.plan"
    plan_text = _read(plan_path) if plan_path.exists() else None
    if task_type is None:
        from opal.planner import detect_task_type

        task_type = detect_task_type(instruction)
    try:
        return TaskInstance(
            id=instance_id or directory.name,
            instruction=instruction,
            documents=documents,
            db_before=db_before,
            db_gold=db_gold,
            task_type=task_type,
            domain=domain,
            fixtures=fixtures,
            plan_text=plan_text,
        )
    except ValueError as err:
        raise InstanceLoadError(str(err)) from err


def load_manifest(path: str | Path) -> list[TaskInstance]:
    """All instances of a manifest file, in listed order.

    The manifest is one JSON document: ``{"instances": [{"path": …,
    "id"?, "task_type"?, "domain"?}, …]}`` with paths relative to the
    manifest's directory.
    """
    path = Path(path)
    try:
        doc = json.loads(_read(path))
    except json.JSONDecodeError as err:
        raise InstanceLoadError(f"manifest {path} is not valid JSON: {err.msg}") from err
    if not isinstance(doc, dict) or not isinstance(doc.get("instances"), list):
        raise InstanceLoadError(f"manifest {path} must carry an 'instances' list")
    instances = []
    for entry in doc["instances"]:
        if not isinstance(entry, dict) or "path" not in entry:
            raise InstanceLoadError(f"manifest entry needs a 'path': {entry!r}")
        instances.append(
            load_instance(
                path.parent / entry["path"],
                instance_id=entry.get("id"),
                task_type=entry.get("task_type"),
                domain=entry.get("domain", "unspecified"),
            )
        )
    return instances


# ---------------------------------------------------------------------------
# Benchmark runs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InstanceResult:
    instance_id: str
    task_type: str
    domain: str
    difficulty: str
    score: InstanceScore
    seconds: float
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "task_type": self.task_type,
            "domain": self.domain,
            "difficulty": self.difficulty,
            "score": self.score.to_dict(),
            # Wall-clock time stays off the artifact so that identical runs
            # serialize byte-identically; read `.seconds` when profiling.
            "error": self.error,
        }


_ZERO = InstanceScore(0.0, 0.0, 0.0, 0, 0, 0)


@dataclass(frozen=True)
class BenchmarkReport:
    """Per-instance results plus Table-style slice aggregates."""

    results: tuple[InstanceResult, ...]

    def slices(self) -> dict[str, dict[str, float]]:
        """Macro-F1 by Difficulty, Task Type, DB Source, and Overall."""

        def agg(group_of) -> dict[str, float]:
            buckets: dict[str, list[float]] = {}
            for r in self.results:
                buckets.setdefault(group_of(r), []).append(r.score.f1)
            return {name: macro_f1(values) for name, values in buckets.items()}

        ordered: dict[str, dict[str, float]] = {}
        difficulty = agg(lambda r: r.difficulty)
        ordered["Difficulty"] = {
            level: difficulty[level] for level in DIFFICULTIES if level in difficulty
        }
        task = agg(lambda r: r.task_type)
        ordered["Task Type"] = {t: task[t] for t in TASK_TYPES if t in task}
        ordered["DB Source"] = dict(sorted(agg(lambda r: r.domain).items()))
        ordered["Overall"] = {"Overall": macro_f1([r.score for r in self.results])}
        return ordered

    def to_dict(self) -> dict:
        return {
            "instances": [r.to_dict() for r in self.results],
            "slices": self.slices(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True)

    def render(self) -> str:
        """Plain-text table: one block per slice axis, one row per bucket."""
        lines = []
        width = max(
            [len(r.instance_id) for r in self.results] + [12]
        )
        for axis, buckets in self.slices().items():
            lines.append(axis)
            for name, value in buckets.items():
                count = sum(
                    1
                    for r in self.results
                    if {
                        "Difficulty": r.difficulty,
                        "Task Type": r.task_type,
                        "DB Source": r.domain,
                        "Overall": "Overall",
                    }[axis]
                    == name
                )
                lines.append(f"  {name:<{width}} {value * 100:6.2f}  (n={count})")
        failures = [r for r in self.results if r.error]
        if failures:
            lines.append("Failures")
            lines.extend(f"  {r.instance_id}: {r.error}" for r in failures)
        return "\n".join(lines)


def run_benchmark(manifest, system, parallelism: int = 1) -> BenchmarkReport:
    """Evaluate ``system`` on every manifest instance; never aborts mid-run.

    ``manifest`` is a manifest path or an already-loaded instance list.
    ``system(instance) -> predicted diff`` (any iterable of 5-tuples); an
    exception from it scores that instance 0 and is recorded on the
    result. Results keep manifest order regardless of parallelism.
    """
    instances = (
        load_manifest(manifest)
        if isinstance(manifest, (str, Path))
        else list(manifest)
    )

    def run_one(instance: TaskInstance) -> InstanceResult:
        started = time.perf_counter()
        try:
            predicted = system(instance)
            score = score_instance(predicted, instance.gold_diff())
            error = None
        except Exception as err:  # per-instance isolation, deliberately broad
            score = _ZERO
            error = f"{type(err).__name__}: {err}"
        return InstanceResult(
            instance_id=instance.id,
            task_type=instance.task_type,
            domain=instance.domain,
            difficulty=instance_difficulty(instance),
            score=score,
            seconds=time.perf_counter() - started,
            error=error,
        )

    if parallelism > 1 and len(instances) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = tuple(pool.map(run_one, instances))
    else:
        results = tuple(run_one(instance) for instance in instances)
    return BenchmarkReport(results)


def sorted_diff(entries) -> list:
    """Deterministic listing of a diff set, for artifacts and reports."""
    return sorted(as_diff_set(entries), key=diff_sort_key)
