"""Benchmark harness: phase suites, success statistics, failure breakdowns.

A suite file lists tasks, repeat counts, conditions, and the generator
configuration. Every (condition, task, repeat) combination is run in a fresh
isolated workspace; runs that die at the adapter or harness level are
retained as failures, never dropped. Summaries report strict success rates
with Wilson score intervals, mean attempts, and mean durations, plus
per-task residual failure classes.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import RecordedAnalyzer, RecordingAnalyzer, SubprocessAnalyzer
from .config import ControllerConfig, load_config
from .generator import HttpGenerator, ScriptedGenerator
from .grace import OperatorStore
from .memory import EpisodeStore
from .orchestrator import Condition, DecodingBandit, RunContext, run_task
from .bandit import LinUcbPolicy
from .skills import SkillLibrary
from .task import TaskSpec, load_task
from .validation import FailureClass


class InvalidCounts(ValueError):
    """Success/trial counts that cannot come from a real experiment."""


# Two-sided normal quantiles for the supported confidence levels.
_Z_BY_CONFIDENCE = {
    0.90: 1.644854,
    0.95: 1.959964,
    0.99: 2.575829,
}


def wilson_interval(
    successes: int, trials: int, confidence: float = 0.95
) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Returns unrounded fractions; rendering rounds to three decimals. The
    endpoints are exact at the degenerate counts: zero successes pins the
    lower bound to 0 and a clean sweep pins the upper bound to 1.
    """
    if trials < 1 or successes < 0 or successes > trials:
        raise InvalidCounts(f"bad counts: {successes}/{trials}")
    z = _Z_BY_CONFIDENCE.get(confidence)
    if z is None:
        raise ValueError(f"unsupported confidence level {confidence}")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials))
    lo = 0.0 if successes == 0 else max(0.0, center - half)  # exact at p = 0
    hi = 1.0 if successes == trials else min(1.0, center + half)  # exact at p = 1
    return (lo, hi)


@dataclass(frozen=True)
class RunRecord:
    condition: str
    task_id: str
    repeat: int
    accepted: bool
    attempts: int
    duration: float
    total_score: int
    failure_class: str
    client_error: bool
    error: str = ""

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "task_id": self.task_id,
            "repeat": self.repeat,
            "accepted": self.accepted,
            "attempts": self.attempts,
            "duration": self.duration,
            "total_score": self.total_score,
            "failure_class": self.failure_class,
            "client_error": self.client_error,
            "error": self.error,
        }


@dataclass
class ConditionSummary:
    runs: int = 0
    successes: int = 0
    attempts: float = 0.0
    duration: float = 0.0
    total_score: float = 0.0

    @property
    def rate(self) -> float:
        return self.successes / self.runs if self.runs else 0.0

    def interval(self) -> tuple[float, float]:
        if self.runs == 0:
            return (0.0, 1.0)
        return wilson_interval(self.successes, self.runs)

    def to_dict(self) -> dict:
        lo, hi = self.interval()
        return {
            "runs": self.runs,
            "successes": self.successes,
            "success_rate": round(self.rate, 3),
            "wilson_ci": [round(lo, 3), round(hi, 3)],
            "mean_attempts": round(self.attempts / self.runs, 3) if self.runs else 0.0,
            "mean_duration": round(self.duration / self.runs, 3) if self.runs else 0.0,
            # Mean validator total score under this artifact's point scheme;
            # not a standard column, reported for diagnostics only.
            "mean_total_score_noncanonical": (
                round(self.total_score / self.runs, 3) if self.runs else 0.0
            ),
        }


@dataclass
class PhaseSummary:
    name: str
    conditions: dict[str, ConditionSummary] = field(default_factory=dict)
    per_task: dict[str, dict] = field(default_factory=dict)
    runs: list[RunRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "conditions": {c: s.to_dict() for c, s in self.conditions.items()},
            "per_task": self.per_task,
            "runs": [r.to_dict() for r in self.runs],
        }

    def render_table(self) -> str:
        header = (
            f"{'Condition':<12} {'Runs':>5} {'Succ':>5} {'Rate':>6} "
            f"{'95% Wilson CI':>17} {'Attempts':>9} {'Time (s)':>10}"
        )
        lines = [f"Phase: {self.name}", header, "-" * len(header)]
        for name, s in self.conditions.items():
            lo, hi = s.interval()
            lines.append(
                f"{name:<12} {s.runs:>5} {s.successes:>5} {s.rate:>6.3f} "
                f"[{lo:>6.3f}, {hi:>6.3f}] "
                f"{s.attempts / max(1, s.runs):>9.3f} {s.duration / max(1, s.runs):>10.3f}"
            )
        return "\n".join(lines)


def summarize_failures(runs: list[RunRecord]) -> dict[tuple[str, str], dict[str, int]]:
    """Residual failure classes per (condition, task), non-passing runs only."""
    breakdown: dict[tuple[str, str], dict[str, int]] = {}
    for run in runs:
        if run.accepted:
            continue
        key = (run.condition, run.task_id)
        counts = breakdown.setdefault(key, {})
        counts[run.failure_class] = counts.get(run.failure_class, 0) + 1
    return breakdown


@dataclass
class Suite:
    """Loaded suite document; paths resolved against the suite file."""

    name: str
    task_paths: list[Path]
    repeats: int
    conditions: list[Condition]
    generator: dict
    analyzer: dict
    config: ControllerConfig
    base_dir: Path


def load_suite(path: str | Path) -> Suite:
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    base = path.parent
    return Suite(
        name=data.get("name", path.stem),
        task_paths=[base / p for p in data["tasks"]],
        repeats=int(data.get("repeats", 1)),
        conditions=[Condition(c) for c in data.get("conditions", ["mera"])],
        generator=dict(data.get("generator", {"kind": "http"})),
        analyzer=dict(data.get("analyzer", {"kind": "subprocess"})),
        config=load_config(overrides=data.get("config")),
        base_dir=base,
    )


def _make_generator(suite: Suite, condition: Condition, task_id: str, repeat: int):
    kind = suite.generator.get("kind", "http")
    if kind == "scripted":
        root = suite.base_dir / suite.generator["root"]
        return ScriptedGenerator(root / condition.value / task_id / f"rep{repeat}")
    if kind == "http":
        return HttpGenerator(
            endpoint=suite.generator.get("endpoint"),
            model=suite.generator.get("model"),
        )
    raise ValueError(f"unknown generator kind {kind!r}")


def _make_analyzer(suite: Suite, workdir: Path):
    kind = suite.analyzer.get("kind", "subprocess")
    if kind == "recorded":
        return RecordedAnalyzer(suite.base_dir / suite.analyzer["path"])
    if kind == "recording":  # capture live responses for later playback
        return RecordingAnalyzer(
            SubprocessAnalyzer(workdir=workdir),
            suite.base_dir / suite.analyzer["path"],
        )
    if kind == "subprocess":
        return SubprocessAnalyzer(workdir=workdir)
    raise ValueError(f"unknown analyzer kind {kind!r}")


def run_phase(suite: Suite, out_dir: str | Path) -> PhaseSummary:
    """Execute every (condition, task, repeat) run and aggregate the phase.

    Controller learning state (bandit arms, skill library, repair operators)
    persists across a condition's runs; episodic memory stays per-run, bound
    to its workspace. Any run that raises at the harness level is recorded as
    a failed run with its error, and the phase continues.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = PhaseSummary(name=suite.name)
    for condition in suite.conditions:
        cond_summary = summary.conditions.setdefault(condition.value, ConditionSummary())
        state_dir = out_dir / "state" / condition.value
        state_dir.mkdir(parents=True, exist_ok=True)
        policy_path = state_dir / "arms.json"
        policy = (
            LinUcbPolicy.load(policy_path)
            if policy_path.exists()
            else LinUcbPolicy(suite.config.bandit.ridge, suite.config.bandit.exploration)
        )
        skill_library = SkillLibrary(state_dir / "skills.jsonl", suite.config.memory.skill_cap)
        operator_store = (
            OperatorStore(state_dir / "operators.jsonl")
            if condition is Condition.GRACE
            else None
        )
        for task_path in suite.task_paths:
            for repeat in range(1, suite.repeats + 1):
                record = _run_one(
                    suite,
                    condition,
                    task_path,
                    repeat,
                    out_dir,
                    policy,
                    skill_library,
                    operator_store,
                )
                summary.runs.append(record)
                cond_summary.runs += 1
                cond_summary.successes += int(record.accepted)
                cond_summary.attempts += record.attempts
                cond_summary.duration += record.duration
                cond_summary.total_score += record.total_score
        policy.save(policy_path)

    for (condition, task_id), counts in sorted(summarize_failures(summary.runs).items()):
        summary.per_task.setdefault(condition, {})[task_id] = {
            "failures": dict(sorted(counts.items()))
        }
    for run in summary.runs:
        entry = summary.per_task.setdefault(run.condition, {}).setdefault(
            run.task_id, {"failures": {}}
        )
        entry["successes"] = entry.get("successes", 0) + int(run.accepted)
        entry["runs"] = entry.get("runs", 0) + 1

    (out_dir / "summary.json").write_text(
        json.dumps(summary.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
    )
    (out_dir / "summary.txt").write_text(summary.render_table() + "\n", encoding="utf-8")
    return summary


def _run_one(
    suite: Suite,
    condition: Condition,
    task_path: Path,
    repeat: int,
    out_dir: Path,
    policy: LinUcbPolicy,
    skill_library: SkillLibrary,
    operator_store: OperatorStore | None,
) -> RunRecord:
    task: TaskSpec | None = None
    start = time.monotonic()
    try:
        run_dir = out_dir / "runs" / condition.value / task_path.stem / f"rep{repeat}"
        workspace = run_dir / "workspace"
        task = load_task(task_path, workspace=workspace)
        ctx = RunContext(
            generator=_make_generator(suite, condition, task.id, repeat),
            analyzer=_make_analyzer(suite, workspace),
            episode_store=EpisodeStore(
                run_dir / "episodes.jsonl", suite.config.memory.retention_cap
            ),
            skill_library=skill_library,
            policy=policy,
            config=suite.config,
            run_dir=run_dir,
            operator_store=operator_store,
            decoding=DecodingBandit(suite.config.decoding.seed)
            if suite.config.decoding.enabled
            else None,
        )
        result = run_task(task, condition, ctx)
        duration = time.monotonic() - start
        if result.final_report is not None:
            failure = result.final_report.primary_failure.value
            score = result.final_report.total_score
        else:
            failure = FailureClass.UNKNOWN.value
            score = 0
        return RunRecord(
            condition=condition.value,
            task_id=task.id,
            repeat=repeat,
            accepted=result.accepted,
            attempts=result.attempts_used,
            duration=duration,
            total_score=score,
            failure_class=FailureClass.UNKNOWN.value if result.accepted else failure,
            client_error=result.client_error,
        )
    except Exception as exc:  # retained-failure rule: errors become failed runs
        return RunRecord(
            condition=condition.value,
            task_id=task.id if task else task_path.stem,
            repeat=repeat,
            accepted=False,
            attempts=0,
            duration=time.monotonic() - start,
            total_score=0,
            failure_class=FailureClass.UNKNOWN.value,
            client_error=True,
            error=str(exc),
        )
