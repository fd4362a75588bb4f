from __future__ import annotations

import pytest

import fixture_sources as src
from mera.grace import (
    GapHint,
    GraceConfig,
    OperatorStore,
    RepairOperator,
    age_hints,
    compose_guidance,
    consolidation_gate,
    derive_gap_hints,
    derive_operator,
    operator_eligibility,
    record_operator_outcome,
)
from mera.validation import FailureClass

CFG = GraceConfig(min_progress_gain=1.0, min_score_gain=5.0, offer_success_threshold=0.5)


class TestConsolidationGate:
    def test_acceptance_always_fires(self):
        assert consolidation_gate(CFG, 1, 0, 6, 0, 100) == 1

    def test_progress_gain_with_steady_score(self):
        assert consolidation_gate(CFG, 0, 3, 2, 40, 40) == 1

    def test_score_gain_with_progress_regression_blocked(self):
        assert consolidation_gate(CFG, 0, 2, 3, 60, 40) == 0

    # Truth table over the three clauses (acceptance, progress-gain,
    # score-gain); each row pins concrete counts that make exactly the
    # chosen clauses true.
    @pytest.mark.parametrize(
        "accepted,passed,prev_passed,score,prev_score,expected",
        [
            (0, 2, 2, 40, 40, 0),   # none: no gain anywhere
            (0, 3, 2, 40, 40, 1),   # progress clause only
            (0, 2, 2, 50, 40, 1),   # score clause only
            (0, 3, 2, 50, 40, 1),   # both gain clauses
            (1, 2, 2, 40, 40, 1),   # acceptance only
            (1, 3, 2, 40, 40, 1),   # acceptance + progress
            (1, 2, 2, 50, 40, 1),   # acceptance + score
            (1, 3, 2, 50, 40, 1),   # all three
        ],
    )
    def test_clause_truth_table(self, accepted, passed, prev_passed, score, prev_score, expected):
        got = consolidation_gate(CFG, accepted, passed, prev_passed, score, prev_score)
        assert got == expected

    def test_progress_gain_with_score_regression_blocked(self):
        # Progress rose but the score fell: neither gain clause holds.
        assert consolidation_gate(CFG, 0, 3, 2, 30, 40) == 0

    def test_gate_monotone_in_current_scores(self):
        for passed in range(7):
            for score in range(0, 101, 10):
                if consolidation_gate(CFG, 0, passed, 2, score, 40) == 1:
                    assert consolidation_gate(CFG, 0, passed + 1, 2, score, 40) == 1
                    assert consolidation_gate(CFG, 0, passed, 2, score + 10, 40) == 1


class TestDeriveOperator:
    def test_identical_sources_produce_no_operator(self, recorded_analyzer):
        op = derive_operator(
            recorded_analyzer,
            src.ALPHA_A,
            src.ALPHA_A,
            FailureClass.RUNTIME,
            FailureClass.RUNTIME,
        )
        assert op is None

    def test_wrapping_call_in_try_adds_handler_kinds(self, recorded_analyzer):
        op = derive_operator(
            recorded_analyzer,
            src.PLAIN_CALL,
            src.GUARDED_CALL,
            FailureClass.RUNTIME,
            FailureClass.UNKNOWN,
            progress_gain=2,
        )
        added = dict(op.added_kinds)
        assert added.get("Try") == 1
        assert added.get("ExceptHandler") == 1
        assert op.from_failure is FailureClass.RUNTIME
        assert "RUNTIME" in op.hint_text

    def test_removing_import_lands_in_removed_kinds(self, recorded_analyzer):
        op = derive_operator(
            recorded_analyzer,
            src.WITH_UNUSED_IMPORT,
            src.WITHOUT_IMPORT,
            FailureClass.IMPORT,
            FailureClass.UNKNOWN,
        )
        removed = dict(op.removed_kinds)
        assert removed.get("Import") == 1
        assert not op.added_kinds


class TestEligibility:
    def make_op(self, offered, succeeded, progress_gain=0.0) -> RepairOperator:
        return RepairOperator(
            id="op1",
            from_failure=FailureClass.RUNTIME,
            to_failure=FailureClass.UNKNOWN,
            added_kinds=(("Try", 1),),
            removed_kinds=(),
            hint_text="hint",
            offered=offered,
            succeeded_offers=succeeded,
            progress_gain=progress_gain,
        )

    def test_ratio_at_threshold_is_eligible(self):
        assert operator_eligibility(CFG, self.make_op(4, 2)) == 1

    def test_ratio_below_threshold_is_not(self):
        assert operator_eligibility(CFG, self.make_op(4, 1)) == 0

    def test_cold_start_bootstrap(self):
        op = self.make_op(0, 0, progress_gain=2.0)
        assert operator_eligibility(CFG, op, FailureClass.RUNTIME) == 1
        # Wrong current failure, bootstrap denied.
        assert operator_eligibility(CFG, op, FailureClass.IMPORT) == 0
        # No recorded progress gain, bootstrap denied.
        weak = self.make_op(0, 0, progress_gain=0.0)
        assert operator_eligibility(CFG, weak, FailureClass.RUNTIME) == 0
        # Bootstrapping disabled entirely.
        no_boot = GraceConfig(bootstrap_enabled=False)
        assert operator_eligibility(no_boot, op, FailureClass.RUNTIME) == 0


class TestComposeGuidance:
    def seed_store(self, tmp_path, ratios) -> OperatorStore:
        store = OperatorStore(tmp_path / "operators.jsonl")
        for i, (offered, succeeded) in enumerate(ratios):
            store.add(
                RepairOperator(
                    id=f"op{i}",
                    from_failure=FailureClass.RUNTIME,
                    to_failure=FailureClass.UNKNOWN,
                    added_kinds=(("Try", 1),),
                    removed_kinds=(),
                    hint_text=f"hint {i}",
                    offered=offered,
                    succeeded_offers=succeeded,
                )
            )
        return store

    def test_empty_store_and_no_hints_yield_no_guidance(self, tmp_path):
        store = OperatorStore(tmp_path / "operators.jsonl")
        blocks, offered = compose_guidance(CFG, store, FailureClass.RUNTIME, [])
        assert blocks == []
        assert offered == []

    def test_top_k_limits_blocks(self, tmp_path):
        store = self.seed_store(tmp_path, [(2, 2), (2, 2), (2, 2)])
        blocks, offered = compose_guidance(CFG, store, FailureClass.RUNTIME, [])
        assert len(blocks) == 2
        assert len(offered) == 2

    def test_ranked_by_success_ratio(self, tmp_path):
        store = self.seed_store(tmp_path, [(5, 4), (5, 3), (5, 2)])  # 0.8, 0.6, 0.4
        blocks, offered = compose_guidance(CFG, store, FailureClass.RUNTIME, [])
        assert [op.id for op in offered] == ["op0", "op1"]
        # Offer counters moved.
        assert store.get("op0").offered == 6

    def test_filters_by_previous_failure(self, tmp_path):
        store = self.seed_store(tmp_path, [(2, 2)])
        blocks, offered = compose_guidance(CFG, store, FailureClass.IMPORT, [])
        assert offered == []

    def test_live_hints_appended(self, tmp_path):
        store = OperatorStore(tmp_path / "operators.jsonl")
        hints = [GapHint("promised function missing", 0, ttl=1)]
        blocks, _ = compose_guidance(CFG, store, None, hints)
        assert blocks == ["gap hint: promised function missing"]

    def test_outcome_crediting(self, tmp_path):
        store = self.seed_store(tmp_path, [(2, 1)])
        _, offered = compose_guidance(CFG, store, FailureClass.RUNTIME, [])
        record_operator_outcome(store, offered, accepted=1)
        assert store.get("op0").succeeded_offers == 2
        record_operator_outcome(store, offered, accepted=0)
        assert store.get("op0").succeeded_offers == 2


class TestGapHints:
    def test_promised_function_absent_from_code(self):
        response = (
            "I will add `normalize_rows(` to clean the matrix, then call it.\n\n"
            "```python\ndef other():\n    return 1\n```\n"
        )
        hints = derive_gap_hints(response, "def other():\n    return 1\n", 0)
        assert len(hints) == 1
        assert "normalize_rows" in hints[0].text

    def test_defined_function_produces_no_hint(self):
        response = (
            "Adding `scale(` below.\n\n```python\ndef scale(x):\n    return x\n```\n"
        )
        hints = derive_gap_hints(response, "def scale(x):\n    return x\n", 0)
        assert hints == []

    def test_code_inside_fences_is_not_prose(self):
        response = "```python\nresult = helper_fn(1)\n```\n"
        assert derive_gap_hints(response, "x = 1\n", 0) == []

    def test_hint_ttl_expiry(self):
        hints = [GapHint("a", 0, ttl=2), GapHint("b", 0, ttl=1)]
        aged = age_hints(hints)
        assert [h.text for h in aged] == ["a"]
        assert age_hints(aged) == []


class TestStorePersistence:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "operators.jsonl"
        store = OperatorStore(path)
        store.add(
            RepairOperator(
                id="opx",
                from_failure=FailureClass.IMPORT,
                to_failure=FailureClass.UNKNOWN,
                added_kinds=(("Call", 2),),
                removed_kinds=(("Import", 1),),
                hint_text="swap the import",
                progress_gain=1.0,
            )
        )
        reloaded = OperatorStore(path)
        assert len(reloaded) == 1
        assert reloaded.get("opx").added_kinds == (("Call", 2),)
        assert reloaded.get("opx").creation_seq == 1
