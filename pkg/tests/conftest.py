from __future__ import annotations

from pathlib import Path

import pytest

from mera.analysis import RecordedAnalyzer
from mera.task import InterfaceContract, RequiredUnit, TaskSpec
from mera.validation import (
    CheckResult,
    FailureClass,
    Outcome,
    STAGE_ORDER,
    ValidationReport,
)

import fixture_sources

DATA_DIR = Path(__file__).parent / "data"
RECORDINGS_PATH = DATA_DIR / "analyzer_recordings.jsonl"
E2E_DIR = DATA_DIR / "e2e"


@pytest.fixture(scope="session")
def recorded_analyzer() -> RecordedAnalyzer:
    analyzer = RecordedAnalyzer(RECORDINGS_PATH)
    if len(analyzer) == 0:
        pytest.fail(
            "no analyzer recordings found; run scripts/refresh_test_data.py "
            "with the analyzer package installed"
        )
    return analyzer


@pytest.fixture
def add_numbers_task(tmp_path: Path) -> TaskSpec:
    """Small fully-staged task validating an add_numbers(a, b) contract."""
    task = TaskSpec(
        id="add_numbers",
        request="write a function add_numbers(a, b) returning the sum",
        family="generic",
        interface=InterfaceContract(
            units=(RequiredUnit(name="add_numbers", arity=2),)
        ),
        commands={"BEHAVIOR": ["{python}", "behavior_test.py"]},
        support_files={"behavior_test.py": fixture_sources.VAL_BEHAVIOR_TEST},
    )
    task.prepare_workspace(tmp_path / "workspace")
    return task


def build_report(pattern: str, extraction_failed: bool = False) -> ValidationReport:
    """Report from a stage-outcome pattern: P (passed), F (failed), S (skipped).

    The pattern maps positionally onto the canonical stage order; shorter
    patterns leave later stages absent, matching fail-fast truncation.
    """
    outcome_by_letter = {"P": Outcome.PASSED, "F": Outcome.FAILED, "S": Outcome.SKIPPED}
    checks = []
    for stage, letter in zip(STAGE_ORDER, pattern):
        detail = "stage failed" if letter == "F" else ""
        checks.append(CheckResult(stage, outcome_by_letter[letter], detail, 0.0))
    return ValidationReport.from_checks(checks, extraction_failed=extraction_failed)


def passing_report() -> ValidationReport:
    return build_report("PPPPPP")


def failing_report(failure: FailureClass = FailureClass.RUNTIME) -> ValidationReport:
    length = {
        FailureClass.SYNTAX: 1,
        FailureClass.UNDEFINED_NAME: 2,
        FailureClass.SPEC_CONTRACT: 3,
        FailureClass.IMPORT: 4,
        FailureClass.RUNTIME: 5,
        FailureClass.BEHAVIOR: 6,
    }[failure]
    return build_report("P" * (length - 1) + "F")
