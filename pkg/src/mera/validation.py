"""Fail-fast validation pipeline and the acceptance gate it feeds.

The pipeline runs the candidate file through up to six ordered checks
(syntax, undefined-name, interface contract, import, runtime, behavior),
stops at the first failure, and produces the structured report that alone
decides acceptance. An optional post-validation judge can veto a passing
report but can never create success.
"""

from __future__ import annotations

import enum
import json
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .analysis import MODE_UNDEFINED_NAMES, MODE_UNITS
from .commands import (
    DEFAULT_OUTPUT_CAP,
    DEFAULT_TIMEOUT,
    CommandResult,
    CommandSpec,
    CommandTimeout,
    run_bounded_command,
    _BUILTIN_ALLOWLIST,
)
from .task import TaskSpec


class Stage(enum.Enum):
    SYNTAX = "SYNTAX"
    UNDEFINED_NAME = "UNDEFINED_NAME"
    SPEC_CONTRACT = "SPEC_CONTRACT"
    IMPORT = "IMPORT"
    RUNTIME = "RUNTIME"
    BEHAVIOR = "BEHAVIOR"


STAGE_ORDER: tuple[Stage, ...] = (
    Stage.SYNTAX,
    Stage.UNDEFINED_NAME,
    Stage.SPEC_CONTRACT,
    Stage.IMPORT,
    Stage.RUNTIME,
    Stage.BEHAVIOR,
)

# Points awarded per passed stage; deeper stages weigh more, total 100.
STAGE_POINTS: dict[Stage, int] = {
    Stage.SYNTAX: 10,
    Stage.UNDEFINED_NAME: 10,
    Stage.SPEC_CONTRACT: 20,
    Stage.IMPORT: 10,
    Stage.RUNTIME: 25,
    Stage.BEHAVIOR: 25,
}


class Outcome(enum.Enum):
    PASSED = "PASSED"
    FAILED = "FAILED"
    SKIPPED = "SKIPPED"


class FailureClass(enum.Enum):
    UNKNOWN = "UNKNOWN"  # absence of failure
    EXTRACTION = "EXTRACTION"
    SYNTAX = "SYNTAX"
    UNDEFINED_NAME = "UNDEFINED_NAME"
    SPEC_CONTRACT = "SPEC_CONTRACT"
    IMPORT = "IMPORT"
    RUNTIME = "RUNTIME"
    TYPE = "TYPE"
    SEMANTIC = "SEMANTIC"
    BEHAVIOR = "BEHAVIOR"


class JudgeVerdict(enum.Enum):
    DISABLED = "DISABLED"
    SKIPPED = "SKIPPED"
    PASS = "PASS"
    UNCERTAIN = "UNCERTAIN"
    LOW_CONFIDENCE_FAIL = "LOW_CONFIDENCE_FAIL"
    HIGH_CONFIDENCE_FAIL = "HIGH_CONFIDENCE_FAIL"


class WorkspaceEscape(Exception):
    """Candidate path resolves outside the task workspace; rejected immediately."""


@dataclass(frozen=True)
class ExecutionBounds:
    """Per-command bounds applied to every pipeline subprocess."""

    timeout: float = DEFAULT_TIMEOUT
    output_cap: int = DEFAULT_OUTPUT_CAP
    allowlist: frozenset[str] = _BUILTIN_ALLOWLIST


@dataclass(frozen=True)
class CheckResult:
    stage: Stage
    outcome: Outcome
    detail: str = ""
    duration: float = 0.0

    def __post_init__(self) -> None:
        if self.duration < 0:
            raise ValueError("duration must be nonnegative")


@dataclass(frozen=True)
class ValidationReport:
    """Ordered check results plus the derived acceptance inputs.

    ``passed_count`` counts non-skipped passes; ``executed_count`` counts
    every check the fail-fast pipeline touched, including explicit skips.
    """

    checks: tuple[CheckResult, ...]
    primary_failure: FailureClass
    passed_count: int
    executed_count: int
    duration: float
    behavior_failed: bool
    extraction_failed: bool
    total_score: int

    @classmethod
    def from_checks(
        cls,
        checks: tuple[CheckResult, ...] | list[CheckResult],
        extraction_failed: bool = False,
        primary_failure: FailureClass | None = None,
    ) -> "ValidationReport":
        checks = tuple(checks)
        _validate_prefix(checks)
        if primary_failure is None:
            if extraction_failed:
                primary_failure = FailureClass.EXTRACTION
            else:
                failed = [c for c in checks if c.outcome is Outcome.FAILED]
                primary_failure = (
                    _classify_failure(failed[0]) if failed else FailureClass.UNKNOWN
                )
        return cls(
            checks=checks,
            primary_failure=primary_failure,
            passed_count=sum(1 for c in checks if c.outcome is Outcome.PASSED),
            executed_count=len(checks),
            duration=sum(c.duration for c in checks),
            behavior_failed=any(
                c.stage is Stage.BEHAVIOR and c.outcome is Outcome.FAILED for c in checks
            ),
            extraction_failed=extraction_failed,
            total_score=sum(
                STAGE_POINTS[c.stage] for c in checks if c.outcome is Outcome.PASSED
            ),
        )

    def to_dict(self) -> dict:
        return {
            "checks": [
                {
                    "stage": c.stage.value,
                    "outcome": c.outcome.value,
                    "detail": c.detail,
                    "duration": c.duration,
                }
                for c in self.checks
            ],
            "primary_failure": self.primary_failure.value,
            "passed_count": self.passed_count,
            "executed_count": self.executed_count,
            "duration": self.duration,
            "behavior_failed": self.behavior_failed,
            "extraction_failed": self.extraction_failed,
            "total_score": self.total_score,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ValidationReport":
        return cls(
            checks=tuple(
                CheckResult(
                    stage=Stage(c["stage"]),
                    outcome=Outcome(c["outcome"]),
                    detail=c.get("detail", ""),
                    duration=float(c.get("duration", 0.0)),
                )
                for c in data["checks"]
            ),
            primary_failure=FailureClass(data["primary_failure"]),
            passed_count=int(data["passed_count"]),
            executed_count=int(data["executed_count"]),
            duration=float(data["duration"]),
            behavior_failed=bool(data["behavior_failed"]),
            extraction_failed=bool(data["extraction_failed"]),
            total_score=int(data["total_score"]),
        )

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8")


def _validate_prefix(checks: tuple[CheckResult, ...]) -> None:
    """A report's checks must follow canonical order with FAILED only last."""
    positions = [STAGE_ORDER.index(c.stage) for c in checks]
    if positions != sorted(positions) or len(set(positions)) != len(positions):
        raise ValueError("checks are out of canonical stage order")
    for c in checks[:-1]:
        if c.outcome is Outcome.FAILED:
            raise ValueError("only the last executed check may be FAILED")


def extraction_failure_report() -> ValidationReport:
    """Report shape for a response from which no code could be extracted."""
    return ValidationReport.from_checks((), extraction_failed=True)


def validator_pass(report: ValidationReport) -> int:
    """Primary pass indicator: every check passed or was skipped and no
    failure class was assigned."""
    all_ok = all(c.outcome is not Outcome.FAILED for c in report.checks)
    return int(all_ok and report.primary_failure is FailureClass.UNKNOWN)


def acceptance(report: ValidationReport, judge_verdict: JudgeVerdict) -> int:
    """Final acceptance: validator pass gated by the judge veto.

    Only a high-confidence judge failure vetoes; a failing validator is never
    overturned, so the judge cannot create success.
    """
    veto_free = 0 if judge_verdict is JudgeVerdict.HIGH_CONFIDENCE_FAIL else 1
    return validator_pass(report) * veto_free


def acceptance_cost(report: ValidationReport, judge_verdict: JudgeVerdict) -> int:
    """Terminal acceptance cost; zero exactly on acceptance."""
    return 1 - acceptance(report, judge_verdict)


def stage_cost(report: ValidationReport) -> float:
    """Progress-sensitive diagnostic cost in [0, 1]; skips count as passes.

    Diagnostic only, never used for acceptance. Zero executed checks (an
    extraction failure) is the worst case, 1.0.
    """
    if report.executed_count == 0:
        return 1.0
    ok = sum(1 for c in report.checks if c.outcome is not Outcome.FAILED)
    return 1.0 - ok / report.executed_count


_TYPE_ERROR_PATTERN = re.compile(r"\bTypeError\b")
_ASSERTION_PATTERN = re.compile(r"\bAssertionError\b")


def _classify_failure(check: CheckResult) -> FailureClass:
    """Refine a failed check into the residual-failure taxonomy."""
    if check.stage is Stage.RUNTIME:
        if _TYPE_ERROR_PATTERN.search(check.detail):
            return FailureClass.TYPE
        return FailureClass.RUNTIME
    if check.stage is Stage.BEHAVIOR:
        if _ASSERTION_PATTERN.search(check.detail):
            return FailureClass.SEMANTIC
        return FailureClass.BEHAVIOR
    return FailureClass(check.stage.value)


_SYNTAX_SNIPPET = (
    "import ast, sys\n"
    "ast.parse(open(sys.argv[1], encoding='utf-8').read(), filename=sys.argv[1])\n"
)

_IMPORT_SNIPPET = (
    "import importlib.util, sys\n"
    "spec = importlib.util.spec_from_file_location('candidate_module', sys.argv[1])\n"
    "mod = importlib.util.module_from_spec(spec)\n"
    "spec.loader.exec_module(mod)\n"
)


def _default_command(stage: Stage) -> list[str] | None:
    if stage is Stage.SYNTAX:
        return ["{python}", "-c", _SYNTAX_SNIPPET, "{file}"]
    if stage is Stage.IMPORT:
        return ["{python}", "-c", _IMPORT_SNIPPET, "{file}"]
    if stage is Stage.RUNTIME:
        return ["{python}", "{file}"]
    return None


def _fill_template(template: list[str], candidate_path: Path, workspace: Path) -> list[str]:
    mapping = {
        "{python}": sys.executable,
        "{file}": str(candidate_path),
        "{workdir}": str(workspace),
    }
    return [mapping.get(part, part) for part in template]


def _bound_detail(text: str, bounds: ExecutionBounds, workspace: Path | None = None) -> str:
    # Diagnostics must not leak absolute workspace paths: reports feed
    # prompts and replay logs, which are compared byte-for-byte across runs.
    if workspace is not None:
        text = text.replace(str(workspace), "<workspace>")
    if len(text) <= bounds.output_cap:
        return text
    return text[: bounds.output_cap] + "\n...[detail truncated]"


class _StageFailure(Exception):
    def __init__(self, detail: str) -> None:
        super().__init__(detail)
        self.detail = detail


def _run_stage_command(
    template: list[str],
    candidate_path: Path,
    workspace: Path,
    bounds: ExecutionBounds,
) -> CommandResult:
    argv = _fill_template(template, candidate_path, workspace)
    cmd = CommandSpec(
        program=argv[0],
        args=tuple(argv[1:]),
        workdir=workspace,
        timeout=bounds.timeout,
        output_cap=bounds.output_cap,
        allowlist=bounds.allowlist,
    )
    return run_bounded_command(cmd)


def _check_undefined_names(analyzer, source: str) -> None:
    response = analyzer.analyze(MODE_UNDEFINED_NAMES, source)
    if not response.ok:
        raise _StageFailure(f"analysis failed: {response.error}")
    names = response.payload.get("names", [])
    if names:
        rendered = ", ".join(f"{n['name']} (line {n['line']})" for n in names)
        raise _StageFailure(f"undefined names: {rendered}")


def _check_interface_contract(analyzer, source: str, task: TaskSpec) -> None:
    response = analyzer.analyze(MODE_UNITS, source)
    if not response.ok:
        raise _StageFailure(f"analysis failed: {response.error}")
    units = {u["qualname"]: u for u in response.payload.get("units", [])}
    classes = {c["name"] for c in response.payload.get("classes", [])}
    problems = []
    for required in task.interface.units:
        if required.kind == "class":
            if required.name not in classes:
                problems.append(f"missing required class {required.name}")
            continue
        unit = units.get(required.name)
        if unit is None:
            problems.append(f"missing required function {required.name}")
        elif len(unit["params"]) != required.arity:
            problems.append(
                f"function {required.name} takes {len(unit['params'])} "
                f"parameters, expected {required.arity}"
            )
    if problems:
        raise _StageFailure("; ".join(problems))


def run_pipeline(
    task: TaskSpec,
    candidate_path: Path | None,
    extraction_failed: bool,
    analyzer,
    bounds: ExecutionBounds | None = None,
) -> ValidationReport:
    """Execute the fail-fast pipeline over a materialized candidate.

    Stages run in canonical order; the first failure stops execution and
    later stages are absent from the report. Stages the task does not declare
    applicable are recorded as skipped. An extraction failure yields a report
    with zero executed checks.

    Raises:
        WorkspaceEscape: candidate path resolves outside the task workspace.
        AnalyzerUnavailable: the analysis subprocess cannot be invoked.
    """
    if extraction_failed:
        return extraction_failure_report()
    if task.workspace is None:
        raise ValueError(f"task {task.id!r} has no workspace bound")
    assert candidate_path is not None
    workspace = task.workspace.resolve()
    resolved = candidate_path.resolve()
    if not resolved.is_relative_to(workspace):
        raise WorkspaceEscape(f"{candidate_path} is outside workspace {workspace}")
    if not resolved.exists():
        raise FileNotFoundError(f"candidate file {resolved} does not exist")

    bounds = bounds or ExecutionBounds()
    applicable = set(task.stages) if task.stages else {s.value for s in STAGE_ORDER}
    source = resolved.read_text(encoding="utf-8")

    checks: list[CheckResult] = []
    for stage in STAGE_ORDER:
        if stage.value not in applicable or (
            stage.value not in task.commands and _default_command(stage) is None
            and stage not in (Stage.UNDEFINED_NAME, Stage.SPEC_CONTRACT)
        ):
            checks.append(
                CheckResult(stage, Outcome.SKIPPED, "not applicable for this task")
            )
            continue

        start = time.monotonic()
        try:
            if stage is Stage.UNDEFINED_NAME:
                _check_undefined_names(analyzer, source)
            elif stage is Stage.SPEC_CONTRACT:
                _check_interface_contract(analyzer, source, task)
            else:
                template = task.commands.get(stage.value) or _default_command(stage)
                result = _run_stage_command(template, resolved, workspace, bounds)
                if result.exit_status != 0:
                    raise _StageFailure(
                        result.combined_output or f"exit status {result.exit_status}"
                    )
        except _StageFailure as failure:
            detail = _bound_detail(failure.detail, bounds, workspace)
            checks.append(
                CheckResult(stage, Outcome.FAILED, detail, time.monotonic() - start)
            )
            break
        except CommandTimeout as exc:
            checks.append(
                CheckResult(
                    stage, Outcome.FAILED, _bound_detail(str(exc), bounds, workspace),
                    time.monotonic() - start,
                )
            )
            break
        else:
            checks.append(CheckResult(stage, Outcome.PASSED, "", time.monotonic() - start))

    return ValidationReport.from_checks(checks)
