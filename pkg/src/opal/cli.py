"""Command-line interface.

Thin adapters only: every subcommand parses arguments, does file I/O, and
calls one module operation. Exit codes: 0 success, 1 I/O or configuration
error, 2 planner failure. All artifact writes are atomic (temp file plus
rename) so an interrupted run never leaves a half-written JSON behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from opal.analyzer import analyze, render_feedback, wrap_diagnostics
from opal.config import ConfigError, EngineConfig, resolve_config
from opal.db import DatabaseError, diff, diff_to_json, load_database, save_database
from opal.engine import benchmark_system, run_instance
from opal.evaluation import (
    InstanceLoadError,
    load_instance,
    run_benchmark,
    score_instance,
)
from opal.observer import analyze_schema
from opal.plan import parse

EXIT_OK = 0
EXIT_IO = 1
EXIT_PLANNER = 2


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def _read_db(path: str):
    return load_database(Path(path).read_text(encoding="utf-8"))


def _config(args: argparse.Namespace) -> EngineConfig:
    return resolve_config(flags=vars(args), config_file=args.config)


def _with_fixture_override(instance, config: EngineConfig):
    if not config.fixtures_path:
        return instance
    fixtures = json.loads(Path(config.fixtures_path).read_text(encoding="utf-8"))
    return replace(instance, fixtures=fixtures)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    config = _config(args)
    instance = _with_fixture_override(load_instance(args.instance_dir), config)
    result = run_instance(instance, config)
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.instance_dir) / "out"
    write_atomic(out_dir / "session.jsonl", result.context.session_jsonl())
    if not result.ok:
        write_atomic(
            out_dir / "report.json",
            json.dumps(result.outcome.report.to_dict(), ensure_ascii=False, indent=2),
        )
        print(result.outcome.report.render(), file=sys.stderr)
        return EXIT_PLANNER
    write_atomic(out_dir / "after.json", save_database(result.database))
    write_atomic(out_dir / "diff.json", diff_to_json(result.diff))
    write_atomic(out_dir / "trace.jsonl", result.execution.trace.to_jsonl(include_timing=False))
    print(
        f"{instance.id}: committed {len(result.diff)} change(s) "
        f"in {result.outcome.generations} generation(s) -> {out_dir}"
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    before = _read_db(args.before)
    predicted = diff(before, _read_db(args.predicted))
    gold = diff(before, _read_db(args.gold))
    score = score_instance(predicted, gold)
    print(json.dumps(score.to_dict(), indent=2, sort_keys=True))
    print(
        f"P={score.precision:.4f} R={score.recall:.4f} F1={score.f1:.4f} "
        f"({score.matched}/{score.predicted} predicted, {score.gold} gold)",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_diff(args: argparse.Namespace) -> int:
    print(diff_to_json(diff(_read_db(args.before), _read_db(args.after))))
    return EXIT_OK


def cmd_observe(args: argparse.Namespace) -> int:
    observation = analyze_schema(_read_db(args.database))
    print(observation.to_json() if args.json else observation.render())
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    source = Path(args.plan).read_text(encoding="utf-8")
    db = _read_db(args.database)
    result = parse(source)
    findings = (
        wrap_diagnostics(result.diagnostics) if not result.ok else analyze(result.program, db)
    )
    print(render_feedback(findings))
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    config = _config(args)
    report = run_benchmark(
        args.manifest, benchmark_system(config), parallelism=config.parallelism
    )
    out_dir = Path(args.out_dir) if args.out_dir else Path("bench_out")
    write_atomic(out_dir / "report.json", report.to_json())
    write_atomic(out_dir / "report.txt", report.render() + "\n")
    print(report.render())
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opal",
        description="Update a relational database from documents per an instruction.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--backend", choices=("mock", "rules", "remote"), default=None)
    common.add_argument("--fixtures", dest="fixtures_path", default=None,
                        help="fixtures JSON overriding the instance's own")
    common.add_argument("--max-revisions", dest="max_revisions", type=int, default=None)
    common.add_argument("--max-restarts", dest="max_restarts", type=int, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument("--out-dir", dest="out_dir", default=None)
    common.add_argument("--parallel", dest="parallelism", type=int, default=None)
    common.add_argument("--timeout", dest="exec_timeout_s", type=float, default=None)

    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common], help="run one instance directory")
    p_run.add_argument("instance_dir")
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="score predicted vs gold databases")
    p_eval.add_argument("--before", required=True)
    p_eval.add_argument("--predicted", required=True)
    p_eval.add_argument("--gold", required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_diff = sub.add_parser("diff", help="diff two database files")
    p_diff.add_argument("before")
    p_diff.add_argument("after")
    p_diff.set_defaults(func=cmd_diff)

    p_observe = sub.add_parser("observe", help="print a database observation")
    p_observe.add_argument("database")
    p_observe.add_argument("--json", action="store_true")
    p_observe.set_defaults(func=cmd_observe)

    p_analyze = sub.add_parser("analyze", help="static findings for a plan file")
    p_analyze.add_argument("plan")
    p_analyze.add_argument("database")
    p_analyze.set_defaults(func=cmd_analyze)

    p_bench = sub.add_parser("bench", parents=[common], help="run a benchmark manifest")
    p_bench.add_argument("manifest")
    p_bench.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InstanceLoadError, ConfigError, DatabaseError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
