"""Command-line entry points: run one task, inspect stores, run a benchmark."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .analysis import RecordedAnalyzer, SubprocessAnalyzer
from .bandit import LinUcbPolicy, RetrievalAction
from .config import load_config
from .generator import make_generator
from .grace import OperatorStore
from .harness import load_suite, run_phase
from .memory import (
    MEMORY_PATH_ENV_VAR,
    EpisodeStore,
    RetrievalMode,
    compute_fingerprint,
    retrieve,
)
from .orchestrator import Condition, RunContext, run_task
from .skills import SkillLibrary
from .task import load_task


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mera",
        description="Validation-gated repair controller around a frozen code generator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one task to acceptance or budget exhaustion")
    run_p.add_argument("--task", required=True, help="task spec file (JSON)")
    run_p.add_argument(
        "--condition",
        choices=[c.value for c in Condition],
        default=Condition.MERA.value,
    )
    run_p.add_argument("--attempts", type=int, default=None, help="override attempt budget")
    run_p.add_argument(
        "--generator",
        required=True,
        help="generator spec: scripted:<dir> or http",
    )
    run_p.add_argument("--workdir", default="mera-run", help="run directory")
    run_p.add_argument("--config", default=None, help="controller config file (JSON)")
    run_p.add_argument(
        "--analyzer-recordings",
        default=None,
        help="replay analyzer responses from this JSONL file instead of spawning it",
    )

    inspect_p = sub.add_parser("inspect", help="inspect persisted controller state")
    inspect_sub = inspect_p.add_subparsers(dest="target", required=True)

    mem_p = inspect_sub.add_parser("memory", help="ranked matches for a task file")
    mem_p.add_argument("--store", required=True, help="episodes.jsonl path")
    mem_p.add_argument("--task", required=True, help="task spec file")
    mem_p.add_argument("--mode", choices=[m.value for m in RetrievalMode], default="AST_MATCH")
    mem_p.add_argument("-k", type=int, default=3)

    skills_p = inspect_sub.add_parser("skills", help="list skills with counters")
    skills_p.add_argument("--store", required=True, help="skills.jsonl path")

    arms_p = inspect_sub.add_parser("arms", help="per-arm estimates and pull counts")
    arms_p.add_argument("--store", required=True, help="arms.json path")

    traces_p = inspect_sub.add_parser("traces", help="dump delayed-credit dispatch records")
    traces_p.add_argument("--store", required=True, help="trace.jsonl path")

    ops_p = inspect_sub.add_parser("operators", help="list repair operators")
    ops_p.add_argument("--store", required=True, help="operators.jsonl path")

    bench_p = sub.add_parser("bench", help="run a benchmark suite")
    bench_p.add_argument("--suite", required=True, help="suite file (JSON)")
    bench_p.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    run_dir = Path(args.workdir)
    workspace = run_dir / "workspace"
    task = load_task(args.task, workspace=workspace)
    if args.attempts is not None:
        task.attempt_budget = args.attempts
    config = load_config(args.config)
    condition = Condition(args.condition)
    if args.analyzer_recordings:
        analyzer = RecordedAnalyzer(args.analyzer_recordings)
    else:
        analyzer = SubprocessAnalyzer(workdir=workspace)
    memory_path = os.environ.get(MEMORY_PATH_ENV_VAR) or run_dir / "episodes.jsonl"
    ctx = RunContext(
        generator=make_generator(args.generator),
        analyzer=analyzer,
        episode_store=EpisodeStore(memory_path, config.memory.retention_cap),
        skill_library=SkillLibrary(run_dir / "skills.jsonl", config.memory.skill_cap),
        policy=LinUcbPolicy(config.bandit.ridge, config.bandit.exploration),
        config=config,
        run_dir=run_dir,
        operator_store=OperatorStore(run_dir / "operators.jsonl")
        if condition is Condition.GRACE
        else None,
    )
    result = run_task(task, condition, ctx)
    ctx.policy.save(run_dir / "arms.json")
    print(json.dumps(result.to_dict(), indent=2, sort_keys=True))
    return 0 if result.accepted else 1


def _cmd_inspect(args: argparse.Namespace) -> int:
    if args.target == "memory":
        store = EpisodeStore(args.store)
        task = load_task(args.task)
        query = compute_fingerprint(task, None, None)
        records = retrieve(store, query, RetrievalMode(args.mode), args.k)
        for record in records:
            print(
                f"record {record.record_id}: family={record.fingerprint.task_family} "
                f"failure={record.fingerprint.failure_signature.failure_class.value} "
                f"accepted={record.accepted} reward={record.reward:.3f}"
            )
    elif args.target == "skills":
        library = SkillLibrary(args.store)
        for record in sorted(library.records, key=lambda r: r.hash):
            print(
                f"{record.hash[:12]} {record.name or '?'} offered={record.offered} "
                f"succeeded={record.succeeded} quarantined={record.quarantined} "
                f"families={','.join(sorted(record.families))}"
            )
    elif args.target == "arms":
        policy = LinUcbPolicy.load(Path(args.store))
        for action in RetrievalAction:
            arm = policy.arms[action]
            theta = ", ".join(f"{v:.4f}" for v in arm.theta_hat())
            print(f"{action.name}: pulls={arm.pulls} theta=[{theta}]")
    elif args.target == "traces":
        for line in Path(args.store).read_text(encoding="utf-8").splitlines():
            if line.strip():
                print(line)
    elif args.target == "operators":
        store = OperatorStore(args.store)
        for op in sorted(store.operators, key=lambda o: o.id):
            print(
                f"{op.id} {op.from_failure.value}->{op.to_failure.value} "
                f"offered={op.offered} succeeded={op.succeeded_offers} | {op.hint_text}"
            )
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    suite = load_suite(args.suite)
    summary = run_phase(suite, args.out)
    print(summary.render_table())
    errored = [r for r in summary.runs if r.error]
    if errored:
        print(f"{len(errored)} run(s) errored at the harness level", file=sys.stderr)
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "inspect":
        return _cmd_inspect(args)
    if args.command == "bench":
        return _cmd_bench(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())
