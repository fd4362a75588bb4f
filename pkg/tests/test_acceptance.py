"""Acceptance suite: one test per exit criterion, each timed against its
stated budget and reporting one pass line. Run with ``pytest -s`` (or
``-rA``) to see the per-criterion lines.
"""

from __future__ import annotations

import itertools
import random
import time

import numpy as np
import pytest

import fixture_sources as src
from conftest import E2E_DIR, RECORDINGS_PATH, build_report
from mera.analysis import RecordedAnalyzer
from mera.bandit import FEATURE_DIM, LinUcbArm, update_arm
from mera.credit import CreditConfig, TraceStep, dispatch_delayed_credit
from mera.generator import ScriptedGenerator
from mera.grace import GraceConfig, consolidation_gate
from mera.harness import load_suite, run_phase, wilson_interval
from mera.bandit import LinUcbPolicy, RetrievalAction
from mera.config import load_config
from mera.memory import EpisodeStore
from mera.orchestrator import Condition, RunContext, run_task
from mera.skills import (
    SkillLibrary,
    harvest_skills,
    record_skill_outcome,
    select_skills,
    skill_hash,
)
from mera.task import InterfaceContract, RequiredUnit, TaskSpec
from mera.validation import (
    FailureClass,
    JudgeVerdict,
    Outcome,
    Stage,
    acceptance,
    acceptance_cost,
    run_pipeline,
    validator_pass,
)

from test_harness import wilson_oracle


class Budget:
    """Assert a criterion finishes inside its stated wall-clock budget."""

    def __init__(self, name: str, seconds: float) -> None:
        self.name = name
        self.seconds = seconds

    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.monotonic() - self.start
        if exc_type is None:
            assert elapsed < self.seconds, (
                f"{self.name} took {elapsed:.2f}s, budget {self.seconds}s"
            )
            print(f"ACCEPTANCE {self.name}: PASS ({elapsed:.2f}s)")
        else:
            print(f"ACCEPTANCE {self.name}: FAIL")
        return False


def test_wilson_reproduction():
    with Budget("wilson-reproduction", 1.0):
        reference_pairs = {
            (0, 9): (0.000, 0.299),
            (8, 9): (0.565, 0.980),
            (11, 11): (0.741, 1.000),
            (10, 11): (0.623, 0.984),
        }
        for (s, n), expected in reference_pairs.items():
            lo, hi = wilson_interval(s, n)
            assert (round(lo, 3), round(hi, 3)) == expected
        for n in range(1, 31):
            for s in range(n + 1):
                lo, hi = wilson_interval(s, n)
                olo, ohi = wilson_oracle(s, n)
                assert abs(lo - olo) < 1e-6 and abs(hi - ohi) < 1e-6


def test_acceptance_complement_property():
    with Budget("acceptance-complement", 5.0):
        patterns = [""]
        for length in range(1, 7):
            for prefix in itertools.product("PS", repeat=length - 1):
                for last in "PSF":
                    patterns.append("".join(prefix) + last)
        checked = 0
        for pattern in patterns:
            report = build_report(pattern)
            for verdict in JudgeVerdict:
                a = acceptance(report, verdict)
                cost = acceptance_cost(report, verdict)
                assert cost == 1 - a and (cost == 0) == (a == 1)
                if verdict is JudgeVerdict.HIGH_CONFIDENCE_FAIL:
                    assert a == 0  # the judge can veto
                if validator_pass(report) == 0:
                    assert a == 0  # but cannot create success
                checked += 1
        assert checked >= 1000


def test_bandit_positive_definiteness_and_inverse():
    with Budget("linucb-positive-definite", 10.0):
        rng = random.Random(2024)
        ridge = 1.0
        for _ in range(100):
            arm = LinUcbArm(ridge=ridge)
            for _ in range(rng.randint(5, 40)):
                phi = tuple(rng.random() for _ in range(FEATURE_DIM))
                update_arm(arm, phi, rng.uniform(-1, 1), rng.uniform(0, 2))
            eigenvalues = np.linalg.eigvalsh(arm.a)
            assert eigenvalues.min() >= ridge - 1e-9

        arm = LinUcbArm(ridge=ridge)
        for _ in range(100):
            phi = tuple(rng.random() for _ in range(FEATURE_DIM))
            update_arm(arm, phi, rng.uniform(-1, 1), rng.uniform(0, 1))
        assert np.max(np.abs(arm.a_inv - np.linalg.inv(arm.a))) < 1e-9


def test_delayed_credit_bound_and_hand_trace():
    with Budget("delayed-credit-bound", 5.0):
        rng = random.Random(99)
        phi = tuple([1.0] + [0.0] * (FEATURE_DIM - 1))

        def step(i, r):
            return TraceStep(i, phi, RetrievalAction.NONE, None, r, True)

        for _ in range(1000):
            cfg = CreditConfig(
                discount=rng.uniform(0, 1),
                trace_decay=rng.uniform(0, 1),
                learning_rate=rng.uniform(0, 2),
                clip_bound=rng.uniform(0, 1.5),
                max_weight=rng.uniform(0, 1),
                eligibility_floor=rng.choice([0.0, 1e-3, 0.1]),
            )
            steps = [step(i, rng.uniform(-1, 1)) for i in range(rng.randint(1, 5))]
            for record in dispatch_delayed_credit(cfg, steps):
                assert abs(record.signal) <= cfg.max_weight * cfg.clip_bound + 1e-12

        cfg = CreditConfig(
            discount=0.9, trace_decay=0.8, learning_rate=0.5,
            clip_bound=1.0, max_weight=0.5,
        )
        records = dispatch_delayed_credit(cfg, [step(0, 0.0), step(1, 1.0)])
        by_key = {(r.source, r.target): r for r in records}
        assert by_key[(0, 1)].eligibility == pytest.approx(0.72)
        assert by_key[(0, 1)].weight == pytest.approx(0.36)
        assert by_key[(0, 1)].signal == pytest.approx(0.36)
        assert by_key[(1, 1)].weight == 0.5
        assert by_key[(1, 1)].signal == 0.5


def test_fail_fast_pipeline_fixture_matrix(tmp_path):
    with Budget("fail-fast-pipeline", 60.0):
        analyzer = RecordedAnalyzer(RECORDINGS_PATH)
        expectations = [
            (src.VAL_SYNTAX_ERROR, [Stage.SYNTAX], FailureClass.SYNTAX),
            (src.VAL_UNDEFINED_NAME, [Stage.SYNTAX, Stage.UNDEFINED_NAME], FailureClass.UNDEFINED_NAME),
            (
                src.VAL_CONTRACT_VIOLATION,
                [Stage.SYNTAX, Stage.UNDEFINED_NAME, Stage.SPEC_CONTRACT],
                FailureClass.SPEC_CONTRACT,
            ),
            (
                src.VAL_BAD_IMPORT,
                [Stage.SYNTAX, Stage.UNDEFINED_NAME, Stage.SPEC_CONTRACT, Stage.IMPORT],
                FailureClass.IMPORT,
            ),
            (
                src.VAL_RUNTIME_CRASH,
                [Stage.SYNTAX, Stage.UNDEFINED_NAME, Stage.SPEC_CONTRACT, Stage.IMPORT, Stage.RUNTIME],
                FailureClass.RUNTIME,
            ),
            (
                src.VAL_BEHAVIOR_WRONG,
                list(Stage),
                FailureClass.SEMANTIC,
            ),
            (src.VAL_PASS, list(Stage), FailureClass.UNKNOWN),
        ]
        for index, (source, stages, failure) in enumerate(expectations):
            task = TaskSpec(
                id=f"fixture_{index}",
                request="write a function add_numbers(a, b) returning the sum",
                family="generic",
                interface=InterfaceContract(units=(RequiredUnit("add_numbers", 2),)),
                commands={"BEHAVIOR": ["{python}", "behavior_test.py"]},
                support_files={"behavior_test.py": src.VAL_BEHAVIOR_TEST},
            )
            task.prepare_workspace(tmp_path / f"ws{index}")
            path = task.workspace / task.target_filename
            path.write_text(source, encoding="utf-8")
            report = run_pipeline(task, path, False, analyzer)
            assert [c.stage for c in report.checks] == stages, source
            assert report.primary_failure is failure, source
            if failure is FailureClass.UNKNOWN:
                assert validator_pass(report) == 1
            else:
                assert report.checks[-1].outcome is Outcome.FAILED


def test_end_to_end_scripted_replay(tmp_path):
    with Budget("scripted-replay", 300.0):
        suite = load_suite(E2E_DIR / "suite.json")
        summaries = []
        for label in ("one", "two"):
            summaries.append(run_phase(suite, tmp_path / label))

        for summary in summaries:
            mera_cond = summary.conditions["mera"]
            assert mera_cond.successes == 8 and mera_cond.runs == 9
            assert round(mera_cond.rate, 3) == 0.889
            lo, hi = mera_cond.interval()
            assert (round(lo, 3), round(hi, 3)) == (0.565, 0.980)
            for other in ("refine", "grace"):
                assert summary.conditions[other].successes == 0
                lo, hi = summary.conditions[other].interval()
                assert (round(lo, 3), round(hi, 3)) == (0.000, 0.299)
            # The one surviving controller failure is runtime-classed.
            failures = summary.per_task["mera"]["q_learning"]["failures"]
            assert failures == {"RUNTIME": 1}
            # The client-error run is retained as a failure, never dropped.
            assert any(r.client_error for r in summary.runs)

        # Byte-identical attempt and dispatch logs across the two runs.
        compared = 0
        for log_name in ("attempts.jsonl", "trace.jsonl"):
            for first_log in sorted((tmp_path / "one").rglob(log_name)):
                second_log = tmp_path / "two" / first_log.relative_to(tmp_path / "one")
                assert second_log.exists(), second_log
                assert first_log.read_bytes() == second_log.read_bytes(), first_log
                compared += 1
        assert compared >= 52  # 26 scripted runs, two logs each


def test_skill_hashing_and_quarantine(tmp_path):
    with Budget("skill-hashing", 10.0):
        analyzer = RecordedAnalyzer(RECORDINGS_PATH)
        library = SkillLibrary(tmp_path / "skills.jsonl")
        harvest_skills(library, src.ALPHA_A, "generic", analyzer)
        harvest_skills(library, src.ALPHA_B, "generic", analyzer)
        harvest_skills(library, src.DOCSTRING_VARIANT, "generic", analyzer)
        assert len(library) == 1, "alpha/docstring variants must collide"
        harvest_skills(library, src.EDITED_VARIANT, "generic", analyzer)
        assert len(library) == 2, "a single-statement edit must split the hash"
        assert skill_hash("a") != skill_hash("b")

        record = [r for r in library.records if r.succeeded == 0][0]
        assert record.quarantined
        from mera.memory import AstFeatures, ComplexityBucket, FailureSignature, Fingerprint

        query = Fingerprint(
            task_family="generic",
            trigrams=(),
            ast=AstFeatures(),
            failure_signature=FailureSignature(),
            bucket=ComplexityBucket.LOW,
        )
        offered = select_skills(library, query, k=2)
        assert all(r.quarantined for r in offered), "offers do not lift quarantine"
        record_skill_outcome(library, offered, accepted=0)
        assert all(r.quarantined for r in library.records), "failure keeps quarantine"
        offered = select_skills(library, query, k=2)
        record_skill_outcome(library, offered, accepted=1)
        assert all(not r.quarantined for r in library.records), (
            "first offered-and-accepted attempt lifts quarantine"
        )


def test_grace_gate_table_and_subordination(tmp_path):
    with Budget("grace-gate", 30.0):
        cfg = GraceConfig(min_progress_gain=1.0, min_score_gain=5.0)
        # All eight combinations of (acceptance, progress clause, score
        # clause) with hand-derived expected gate values.
        table = [
            (0, 2, 2, 40, 40, 0),
            (0, 3, 2, 40, 40, 1),
            (0, 2, 2, 50, 40, 1),
            (0, 3, 2, 50, 40, 1),
            (1, 2, 2, 40, 40, 1),
            (1, 3, 2, 40, 40, 1),
            (1, 2, 2, 50, 40, 1),
            (1, 3, 2, 50, 40, 1),
        ]
        for accepted, p, p_prev, v, v_prev, expected in table:
            assert consolidation_gate(cfg, accepted, p, p_prev, v, v_prev) == expected
        # Cross-clause interference: a gain on one axis with a regression on
        # the other never fires.
        assert consolidation_gate(cfg, 0, 3, 2, 30, 40) == 0
        assert consolidation_gate(cfg, 0, 1, 2, 60, 40) == 0

        # Subordination: enabling the guidance arm cannot change acceptance.
        analyzer = RecordedAnalyzer(RECORDINGS_PATH)
        config = load_config(overrides={"reward": {"latency_weight": 0.0}})
        outcomes = {}
        for condition in (Condition.MERA, Condition.GRACE):
            base = tmp_path / condition.value
            scripts = base / "scripts"
            scripts.mkdir(parents=True)
            for i, code in enumerate((src.VAL_RUNTIME_CRASH, src.VAL_PASS)):
                (scripts / f"{i:03d}.txt").write_text(
                    f"Next try.\n\n```python\n{code}```\n", encoding="utf-8"
                )
            task = TaskSpec(
                id="add_numbers",
                request="write a function add_numbers(a, b) returning the sum",
                family="generic",
                interface=InterfaceContract(units=(RequiredUnit("add_numbers", 2),)),
                commands={"BEHAVIOR": ["{python}", "behavior_test.py"]},
                support_files={"behavior_test.py": src.VAL_BEHAVIOR_TEST},
            )
            task.prepare_workspace(base / "workspace")
            ctx = RunContext(
                generator=ScriptedGenerator(scripts),
                analyzer=analyzer,
                episode_store=EpisodeStore(base / "episodes.jsonl"),
                skill_library=SkillLibrary(base / "skills.jsonl"),
                policy=LinUcbPolicy(),
                config=config,
                run_dir=base / "run",
                operator_store=None,
            )
            if condition is Condition.GRACE:
                from mera.grace import OperatorStore

                ctx.operator_store = OperatorStore(base / "operators.jsonl")
            result = run_task(task, condition, ctx)
            outcomes[condition.value] = (
                result.accepted,
                [entry["accepted"] for entry in result.attempt_log],
                [entry["primary_failure"] for entry in result.attempt_log],
            )
        assert outcomes["mera"] == outcomes["grace"]
