"""Online validation-conditioned refinement loop.

Per attempt: build the context features, pick a retrieval action, fingerprint
the state, gather evidence, compose a deterministic prompt, call the frozen
generator, extract and materialize the candidate, validate, shape the reward,
update the learners, and persist the episode. The loop stops on acceptance or
budget exhaustion; delayed credit is dispatched at either terminal event.

All recalled evidence enters the prompt under explicit untrusted labels.
Nothing in this module can mark an attempt successful except the validator's
acceptance gate.
"""

from __future__ import annotations

import difflib
import enum
import hashlib
import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .bandit import AttemptContext, FeatureVector, LinUcbPolicy, RetrievalAction, build_features
from .commands import load_allowlist
from .config import ControllerConfig
from .credit import DispatchRecord, TraceStep, append_dispatch_log, dispatch_delayed_credit
from .generator import DECODING_PROFILES, GeneratorUnreachable
from .grace import (
    GapHint,
    age_hints,
    compose_guidance,
    consolidation_gate,
    derive_gap_hints,
    derive_operator,
    record_operator_outcome,
    OperatorStore,
    ParseFailure as GraceParseFailure,
)
from .memory import (
    EmptyStore,
    EpisodeRecord,
    EpisodeStore,
    Fingerprint,
    RetrievalMode,
    compute_fingerprint,
    retrieve,
)
from .rewards import pseudo_success, shaped_reward
from .skills import (
    EmptyLibrary,
    ParseFailure as SkillParseFailure,
    SkillLibrary,
    SkillRecord,
    harvest_skills,
    record_skill_outcome,
    select_skills,
)
from .task import TaskSpec
from .validation import (
    ExecutionBounds,
    JudgeVerdict,
    ValidationReport,
    acceptance,
    extraction_failure_report,
    run_pipeline,
)

EPISODE_SNIPPET_CHARS = 1500
SKILL_SNIPPET_CHARS = 1200


class Condition(enum.Enum):
    """Benchmark conditions: plain self-refinement, the full controller, and
    the controller plus the investigated guidance arm."""

    REFINE_B1 = "refine"
    MERA = "mera"
    GRACE = "grace"

    @property
    def uses_learning(self) -> bool:
        return self is not Condition.REFINE_B1


_FENCED_BLOCK = re.compile(r"```([^\n`]*)\n(.*?)```", re.DOTALL)


def extract_code(response: str, language: str = "python") -> str | None:
    """Candidate source from a generator response, or None.

    The first fenced block tagged with the target language wins; otherwise
    the longest untagged fenced block; otherwise extraction failed. The
    block's contents are returned exactly, trailing newline included.
    """
    untagged: list[str] = []
    for match in _FENCED_BLOCK.finditer(response):
        tag = match.group(1).strip().lower()
        body = match.group(2)
        if tag == language or (language == "python" and tag in ("py", "python3")):
            return body
        if not tag:
            untagged.append(body)
    if untagged:
        return max(untagged, key=len)
    return None


@dataclass
class AttemptState:
    """What the controller observes at one attempt."""

    attempt_index: int
    current_source: str | None
    prev_report: ValidationReport | None
    history: list[str] = field(default_factory=list)

    def append_feedback(self, block: str, max_blocks: int) -> None:
        self.history.append(block)
        if len(self.history) > max_blocks:
            del self.history[: len(self.history) - max_blocks]


def _fence(text: str, tag: str = "python") -> str:
    if not text.endswith("\n"):
        text += "\n"
    return f"```{tag}\n{text}```"


def render_report(report: ValidationReport, detail_chars: int = 400) -> str:
    lines = []
    for check in report.checks:
        line = f"{check.stage.value}: {check.outcome.value}"
        if check.detail:
            detail = check.detail[:detail_chars]
            line += f"\n  {detail}"
        lines.append(line)
    if report.extraction_failed:
        lines.append("no code block could be extracted from the response")
    lines.append(f"primary failure: {report.primary_failure.value}")
    lines.append(f"passed {report.passed_count} of {report.executed_count} checks")
    return "\n".join(lines)


def _render_episode(record: EpisodeRecord) -> str:
    outcome = "accepted" if record.accepted else "rejected"
    header = (
        f"UNTRUSTED PRIOR ATTEMPT ({record.fingerprint.task_family}, {outcome}, "
        f"failure {record.fingerprint.failure_signature.failure_class.value})"
    )
    body = (record.candidate_source or "")[:EPISODE_SNIPPET_CHARS]
    return f"{header}\n{_fence(body)}"


def _render_skill(skill: SkillRecord) -> str:
    params = ", ".join(skill.params)
    header = f"UNTRUSTED SKILL {skill.name or skill.hash[:12]}({params})"
    return f"{header}\n{_fence(skill.canonical_body[:SKILL_SNIPPET_CHARS])}"


def compose_prompt(
    task: TaskSpec,
    attempt: AttemptState,
    episodes: list[EpisodeRecord],
    skills: list[SkillRecord],
    guidance: list[str],
    diff_block: str | None = None,
    history_block_chars: int = 2000,
) -> str:
    """Deterministic prompt assembly with a fixed section order.

    Identical inputs produce byte-identical prompts. All recalled material is
    prefixed as untrusted.
    """
    sections: list[str] = [f"# Task\n{task.request}"]
    if attempt.current_source is not None:
        sections.append(
            f"# Current file ({task.target_filename})\n{_fence(attempt.current_source)}"
        )
    if attempt.prev_report is not None:
        sections.append(f"# Previous validation report\n{render_report(attempt.prev_report)}")
    for record in episodes:
        sections.append(_render_episode(record))
    for skill in skills:
        sections.append(_render_skill(skill))
    for block in guidance:
        sections.append(f"UNTRUSTED GUIDANCE\n{block}")
    if diff_block is not None:
        sections.append(
            f"# Diff between the last two candidates\n{_fence(diff_block, 'diff')}"
        )
    if attempt.history:
        rendered = "\n\n".join(block[:history_block_chars] for block in attempt.history)
        sections.append(f"# Feedback history\n{rendered}")
    sections.append(
        "Respond with exactly one complete fenced ```python code block containing "
        f"the full contents of {task.target_filename}."
    )
    return "\n\n".join(sections)


class DecodingBandit:
    """Optional Thompson sampler over decoding profiles.

    Beta(successes + 1, failures + 1) per profile; updates arrive as
    fractional pseudo-counts derived from the pseudo-success mapping.
    """

    def __init__(self, seed: int = 0) -> None:
        self.posteriors: dict[str, list[float]] = {
            name: [0.0, 0.0] for name in DECODING_PROFILES
        }
        self._rng = random.Random(seed)

    def select(self) -> str:
        best_name, best_draw = "", -1.0
        for name in sorted(self.posteriors):
            s, f = self.posteriors[name]
            draw = self._rng.betavariate(s + 1.0, f + 1.0)
            if draw > best_draw:
                best_name, best_draw = name, draw
        return best_name

    def update(self, profile: str, reward: float, weight: float = 1.0) -> None:
        value = pseudo_success(max(-1.0, min(1.0, reward)))
        self.posteriors[profile][0] += weight * value
        self.posteriors[profile][1] += weight * (1.0 - value)


@dataclass
class RunContext:
    """Everything one task run depends on."""

    generator: object
    analyzer: object
    episode_store: EpisodeStore
    skill_library: SkillLibrary
    policy: LinUcbPolicy
    config: ControllerConfig
    run_dir: Path
    operator_store: OperatorStore | None = None
    judge: object | None = None
    decoding: DecodingBandit | None = None

    def bounds(self) -> ExecutionBounds:
        return ExecutionBounds(
            timeout=self.config.bounds.command_timeout,
            output_cap=self.config.bounds.output_cap,
            allowlist=load_allowlist(),
        )


@dataclass
class TaskResult:
    task_id: str
    condition: Condition
    accepted: bool
    attempts_used: int
    final_report: ValidationReport | None
    accepted_source: str | None
    client_error: bool
    attempt_log: list[dict]
    dispatch_records: list[DispatchRecord]

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "condition": self.condition.value,
            "accepted": self.accepted,
            "attempts_used": self.attempts_used,
            "final_report": self.final_report.to_dict() if self.final_report else None,
            "client_error": self.client_error,
            "attempts": self.attempt_log,
        }


def _sha(text: str | None) -> str:
    if text is None:
        return ""
    return hashlib.blake2b(text.encode("utf-8"), digest_size=16).hexdigest()


@dataclass
class _Evidence:
    episodes: list[EpisodeRecord] = field(default_factory=list)
    skills: list[SkillRecord] = field(default_factory=list)
    diff_block: str | None = None

    @property
    def injected(self) -> bool:
        return bool(self.episodes or self.skills or self.diff_block)


def _gather_evidence(
    ctx: RunContext,
    action: RetrievalAction,
    query: Fingerprint,
    candidates: list[str],
) -> _Evidence:
    """Resolve a retrieval action into prompt evidence; empty stores degrade
    to no context rather than failing the attempt."""
    evidence = _Evidence()
    weights = ctx.config.memory.weights

    def from_memory(mode: RetrievalMode, k: int) -> list[EpisodeRecord]:
        try:
            return retrieve(ctx.episode_store, query, mode, k, weights)
        except EmptyStore:
            return []

    def from_library(k: int) -> list[SkillRecord]:
        try:
            return select_skills(ctx.skill_library, query, k)
        except EmptyLibrary:
            return []

    if action is RetrievalAction.ONE_FAILURE_MATCH:
        evidence.episodes = from_memory(RetrievalMode.FAILURE_MATCH, 1)
    elif action is RetrievalAction.ONE_AST_MATCH:
        evidence.episodes = from_memory(RetrievalMode.AST_MATCH, 1)
    elif action is RetrievalAction.ONE_FAILURE_ONE_AST:
        merged = from_memory(RetrievalMode.FAILURE_MATCH, 1)
        for record in from_memory(RetrievalMode.AST_MATCH, 1):
            if all(record.record_id != r.record_id for r in merged):
                merged.append(record)
        evidence.episodes = merged
    elif action is RetrievalAction.TWO_AST_MATCH:
        evidence.episodes = from_memory(RetrievalMode.AST_MATCH, 2)
    elif action is RetrievalAction.ONE_SKILL_ONLY:
        evidence.skills = from_library(1)
    elif action is RetrievalAction.ONE_FAILURE_ONE_SKILL:
        evidence.episodes = from_memory(RetrievalMode.FAILURE_MATCH, 1)
        evidence.skills = from_library(1)
    elif action is RetrievalAction.DIFF_ONLY:
        if len(candidates) >= 2:
            diff = difflib.unified_diff(
                candidates[-2].splitlines(keepends=True),
                candidates[-1].splitlines(keepends=True),
                fromfile="previous",
                tofile="current",
            )
            evidence.diff_block = "".join(diff)
    return evidence


def run_task(task: TaskSpec, condition: Condition, ctx: RunContext) -> TaskResult:
    """Run one task to acceptance or budget exhaustion.

    Under REFINE_B1 the retrieval action is always NONE and no learner is
    updated; MERA adds bandit-selected retrieval, memory, and skills; GRACE
    additionally consolidates repair operators and injects guidance blocks.
    """
    if task.workspace is None:
        raise ValueError(f"task {task.id!r} has no workspace bound")
    run_dir = ctx.run_dir
    for sub in ("prompts", "responses", "candidates", "reports"):
        (run_dir / sub).mkdir(parents=True, exist_ok=True)

    cfg = ctx.config
    budget = task.attempt_budget
    state = AttemptState(0, None, None)
    trajectory: list[TraceStep] = []
    attempt_log: list[dict] = []
    candidates: list[str] = []
    hints: list[GapHint] = []
    result_kwargs = dict(
        task_id=task.id,
        condition=condition,
        accepted=False,
        attempts_used=0,
        final_report=None,
        accepted_source=None,
        client_error=False,
    )

    def finish(dispatch: bool = True) -> TaskResult:
        records: list[DispatchRecord] = []
        if dispatch and trajectory:
            records = _dispatch(ctx, condition, trajectory)
        (run_dir / "attempts.jsonl").write_text(
            "".join(json.dumps(e, sort_keys=True) + "\n" for e in attempt_log),
            encoding="utf-8",
        )
        result = TaskResult(
            attempt_log=attempt_log, dispatch_records=records, **result_kwargs
        )
        (run_dir / "result.json").write_text(
            json.dumps(result.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )
        return result

    for t in range(budget):
        result_kwargs["attempts_used"] = t + 1
        phi = build_features(
            AttemptContext(
                attempt_index=t,
                attempt_budget=budget,
                prev_report=state.prev_report,
                edit_mode=state.current_source is not None,
            )
        )
        decoding_action = None
        if ctx.decoding is not None and cfg.decoding.enabled and condition.uses_learning:
            decoding_action = ctx.decoding.select()

        if condition.uses_learning:
            action = ctx.policy.select(phi)
        else:
            action = RetrievalAction.NONE

        query = compute_fingerprint(
            task,
            state.current_source,
            state.prev_report,
            analyzer=ctx.analyzer,
            trigram_cap=cfg.memory.trigram_cap,
        )
        evidence = (
            _gather_evidence(ctx, action, query, candidates)
            if condition.uses_learning
            else _Evidence()
        )
        attributable = action is RetrievalAction.NONE or evidence.injected

        guidance: list[str] = []
        offered_ops = []
        if condition is Condition.GRACE and ctx.operator_store is not None:
            prev_failure = (
                state.prev_report.primary_failure if state.prev_report else None
            )
            guidance, offered_ops = compose_guidance(
                cfg.grace, ctx.operator_store, prev_failure, hints
            )

        prompt = compose_prompt(
            task,
            state,
            evidence.episodes,
            evidence.skills,
            guidance,
            evidence.diff_block,
            history_block_chars=cfg.history.block_chars,
        )
        (run_dir / "prompts" / f"attempt_{t}.txt").write_text(prompt, encoding="utf-8")

        profile = DECODING_PROFILES.get(decoding_action) if decoding_action else None
        try:
            response = ctx.generator.generate(prompt, profile)
        except GeneratorUnreachable as exc:
            attempt_log.append(
                {"attempt": t, "client_error": str(exc), "retrieval_action": action.name}
            )
            result_kwargs["client_error"] = True
            return finish()
        (run_dir / "responses" / f"attempt_{t}.txt").write_text(response, encoding="utf-8")

        source = extract_code(response)
        entry = {
            "attempt": t,
            "retrieval_action": action.name,
            "decoding_action": decoding_action,
            "attributable": attributable,
            "extraction_failed": source is None,
            "prompt_sha": _sha(prompt),
            "response_sha": _sha(response),
            "candidate_sha": _sha(source),
        }

        if source is None:
            report = extraction_failure_report()
            reward = shaped_reward(
                cfg.reward,
                accepted=0,
                passed_count=0,
                attempt_index=t,
                extraction_failed=1,
                behavior_failed=0,
                duration=report.duration,
            )
            report.write(run_dir / "reports" / f"attempt_{t}.json")
            trajectory.append(
                TraceStep(t, phi, action, decoding_action, reward, attributable)
            )
            entry.update(_report_fields(report, reward, accepted=0))
            attempt_log.append(entry)
            state.prev_report = report
            result_kwargs["final_report"] = report
            state.append_feedback(render_report(report), cfg.history.max_blocks)
            if condition is Condition.GRACE:
                hints = age_hints(hints) + derive_gap_hints(response, None, t, cfg.grace.hint_ttl)
            continue

        # Direct-loop semantics: the candidate becomes the target file before
        # validation; acceptance, not write authorization, is the gate.
        task.target_path.write_text(source, encoding="utf-8")
        (run_dir / "candidates" / f"attempt_{t}.py").write_text(source, encoding="utf-8")
        report = run_pipeline(task, task.target_path, False, ctx.analyzer, ctx.bounds())
        report.write(run_dir / "reports" / f"attempt_{t}.json")

        verdict = JudgeVerdict.DISABLED
        if ctx.judge is not None:
            verdict = ctx.judge(task, source, report)
        accepted = acceptance(report, verdict)
        reward = shaped_reward(
            cfg.reward,
            accepted=accepted,
            passed_count=report.passed_count,
            attempt_index=t,
            extraction_failed=0,
            behavior_failed=int(report.behavior_failed),
            duration=report.duration,
        )

        if condition.uses_learning and attributable:
            ctx.policy.update(action, phi, reward, weight=1.0)
        if ctx.decoding is not None and cfg.decoding.enabled and decoding_action:
            ctx.decoding.update(decoding_action, reward, weight=1.0)

        record = EpisodeRecord(
            fingerprint=compute_fingerprint(
                task, source, report, analyzer=ctx.analyzer,
                trigram_cap=cfg.memory.trigram_cap,
            ),
            task_text=task.request,
            candidate_source=source,
            report=report,
            reward=reward,
            accepted=accepted,
            duration=report.duration,
            decoding_action=decoding_action,
            retrieval_action=action,
        )
        ctx.episode_store.persist(record)
        trajectory.append(TraceStep(t, phi, action, decoding_action, reward, attributable))

        if evidence.skills:
            record_skill_outcome(ctx.skill_library, evidence.skills, accepted)
        if condition is Condition.GRACE and ctx.operator_store is not None:
            record_operator_outcome(ctx.operator_store, offered_ops, accepted)
            _consolidate(ctx, cfg, state, report, source, accepted, candidates)
            hints = age_hints(hints) + derive_gap_hints(response, source, t, cfg.grace.hint_ttl)

        candidates.append(source)
        entry.update(_report_fields(report, reward, accepted))
        attempt_log.append(entry)
        result_kwargs["final_report"] = report

        if accepted:
            result_kwargs["accepted"] = True
            result_kwargs["accepted_source"] = source
            try:
                harvest_skills(ctx.skill_library, source, task.family, ctx.analyzer)
            except SkillParseFailure:
                pass  # acceptance/analyzer inconsistency; logged via report files
            return finish()

        state.prev_report = report
        state.current_source = source
        state.append_feedback(render_report(report), cfg.history.max_blocks)

    return finish()


def _report_fields(report: ValidationReport, reward: float, accepted: int) -> dict:
    return {
        "stages": [[c.stage.value, c.outcome.value] for c in report.checks],
        "primary_failure": report.primary_failure.value,
        "passed_count": report.passed_count,
        "executed_count": report.executed_count,
        "total_score": report.total_score,
        "reward": reward,
        "accepted": accepted,
    }


def _consolidate(
    ctx: RunContext,
    cfg: ControllerConfig,
    state: AttemptState,
    report: ValidationReport,
    source: str,
    accepted: int,
    candidates: list[str],
) -> None:
    """Gate the transition from the previous attempt and store its operator."""
    prev_report = state.prev_report
    prev_passed = prev_report.passed_count if prev_report else 0
    prev_score = prev_report.total_score if prev_report else 0
    gate = consolidation_gate(
        cfg.grace,
        accepted,
        report.passed_count,
        prev_passed,
        report.total_score,
        prev_score,
    )
    if not gate or not candidates or prev_report is None:
        return
    try:
        op = derive_operator(
            ctx.analyzer,
            candidates[-1],
            source,
            prev_report.primary_failure,
            report.primary_failure,
            progress_gain=report.passed_count - prev_passed,
        )
    except GraceParseFailure:
        return
    if op is not None:
        ctx.operator_store.add(op)


def _dispatch(
    ctx: RunContext, condition: Condition, trajectory: list[TraceStep]
) -> list[DispatchRecord]:
    """Terminal delayed-credit dispatch; sinks are wired only when learning."""
    bandit_sink = None
    decoding_sink = None
    if condition.uses_learning:

        def bandit_sink(action: RetrievalAction, phi: FeatureVector, delta: float, weight: float) -> None:
            ctx.policy.update(action, phi, delta, weight)

        if ctx.decoding is not None and ctx.config.decoding.enabled:

            def decoding_sink(profile: str, delta: float, weight: float) -> None:
                ctx.decoding.update(profile, delta, weight)

    records = dispatch_delayed_credit(
        ctx.config.credit, trajectory, bandit_sink, decoding_sink
    )
    append_dispatch_log(ctx.run_dir / "trace.jsonl", records)
    return records
