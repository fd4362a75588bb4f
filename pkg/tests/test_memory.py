from __future__ import annotations

import fcntl
import json

import pytest
from hypothesis import given, settings, strategies as st

from conftest import failing_report, passing_report
import fixture_sources as src
from mera.bandit import RetrievalAction
from mera.memory import (
    AstFeatures,
    ComplexityBucket,
    EmptyStore,
    EpisodeRecord,
    EpisodeStore,
    FailureSignature,
    Fingerprint,
    RetrievalMode,
    SimilarityWeights,
    StorageFailure,
    compute_fingerprint,
    retrieve,
    similarity,
    token_trigrams,
)
from mera.task import TaskSpec
from mera.validation import FailureClass


def make_task(request="train a q learning agent", family="q-learning") -> TaskSpec:
    return TaskSpec(id="demo", request=request, family=family)


def make_fingerprint(
    family="q-learning",
    trigrams=(("train", "a", "q"),),
    ast=None,
    signature=None,
    bucket=ComplexityBucket.LOW,
) -> Fingerprint:
    return Fingerprint(
        task_family=family,
        trigrams=tuple(trigrams),
        ast=ast or AstFeatures(),
        failure_signature=signature or FailureSignature(),
        bucket=bucket,
    )


class TestTrigrams:
    def test_direct_windowing(self):
        grams = token_trigrams("train a q learning agent")
        assert set(grams) == {
            ("train", "a", "q"),
            ("a", "q", "learning"),
            ("q", "learning", "agent"),
        }

    def test_short_text_yields_empty_set(self):
        assert token_trigrams("two words") == ()
        assert token_trigrams("") == ()

    def test_repetition_collapses_to_set(self):
        once = token_trigrams("solve the maze")
        twice = token_trigrams("solve the maze solve the maze")
        assert set(once) <= set(twice)
        assert set(token_trigrams("solve the maze " * 5)) == set(
            token_trigrams("solve the maze solve the maze")
        )

    def test_cap_truncates_in_first_occurrence_order(self):
        text = " ".join(f"tok{i}" for i in range(50))
        grams = token_trigrams(text, cap=5)
        assert len(grams) == 5
        assert grams[0] == ("tok0", "tok1", "tok2")


class TestFingerprint:
    def test_determinism(self, recorded_analyzer):
        task = make_task()
        report = failing_report()
        first = compute_fingerprint(
            task, src.THREE_FUNCS_NESTED_LOOP, report, recorded_analyzer
        )
        second = compute_fingerprint(
            task, src.THREE_FUNCS_NESTED_LOOP, report, recorded_analyzer
        )
        assert first == second

    def test_absent_source_zeroes_features(self, recorded_analyzer):
        fp = compute_fingerprint(make_task(), None, None, recorded_analyzer)
        assert fp.ast == AstFeatures()
        assert fp.bucket is ComplexityBucket.LOW
        assert fp.failure_signature.failure_class is FailureClass.UNKNOWN

    def test_structure_counts_from_analyzer(self, recorded_analyzer):
        fp = compute_fingerprint(
            make_task(), src.THREE_FUNCS_NESTED_LOOP, None, recorded_analyzer
        )
        assert fp.ast.function_count == 3
        assert fp.ast.max_loop_depth == 2

    def test_failure_signature_from_previous_report(self, recorded_analyzer):
        report = failing_report(FailureClass.IMPORT)
        fp = compute_fingerprint(make_task(), None, report, recorded_analyzer)
        assert fp.failure_signature.failure_class is FailureClass.IMPORT
        assert fp.failure_signature.diagnostic_key == "stage"

    def test_round_trip(self, recorded_analyzer):
        fp = compute_fingerprint(
            make_task(), src.TWO_FUNCS_ONE_METHOD, failing_report(), recorded_analyzer
        )
        assert Fingerprint.from_dict(json.loads(json.dumps(fp.to_dict()))) == fp


class TestSimilarity:
    def test_identical_fingerprints_score_one(self):
        fp = make_fingerprint()
        assert similarity(fp, fp) == 1.0

    def test_fully_disjoint_fingerprints_score_zero(self):
        a = make_fingerprint(
            family="q-learning",
            trigrams=(("a", "b", "c"),),
            ast=AstFeatures(
                function_count=1,
                class_count=1,
                max_loop_depth=1,
                recursion_flag=True,
                class_usage_flag=True,
                state_machine_flag=True,
                approx_cyclomatic=2,
                common_library_flags=tuple(
                    (name, True) for name, _ in AstFeatures().common_library_flags
                ),
                import_names=("numpy",),
                return_arity_profile=((1, 2),),
            ),
            signature=FailureSignature(FailureClass.IMPORT, "x"),
        )
        b = make_fingerprint(
            family="sarsa",
            trigrams=(("d", "e", "f"),),
            ast=AstFeatures(import_names=("json",), return_arity_profile=((0, 1),)),
            signature=FailureSignature(FailureClass.RUNTIME, "y"),
        )
        assert similarity(a, b) == 0.0

    def test_weighted_mean_hand_value(self):
        # Same trigrams and structure, different family and failure:
        # (0.4 + 0.3) / 1.0 = 0.7 under the default weights.
        a = make_fingerprint(
            family="q-learning", signature=FailureSignature(FailureClass.IMPORT, "x")
        )
        b = make_fingerprint(
            family="sarsa", signature=FailureSignature(FailureClass.RUNTIME, "y")
        )
        assert similarity(a, b) == pytest.approx(0.7)

    def test_failure_class_match_without_key_is_half(self):
        a = make_fingerprint(signature=FailureSignature(FailureClass.IMPORT, "x"))
        b = make_fingerprint(signature=FailureSignature(FailureClass.IMPORT, "y"))
        weights = SimilarityWeights(token=0.0, ast=0.0, failure=1.0, family=0.0)
        assert similarity(a, b, weights) == 0.5

    def test_weights_must_be_valid(self):
        with pytest.raises(ValueError):
            SimilarityWeights(token=-0.1)
        with pytest.raises(ValueError):
            SimilarityWeights(0.0, 0.0, 0.0, 0.0)


ast_strategy = st.builds(
    AstFeatures,
    function_count=st.integers(0, 5),
    class_count=st.integers(0, 3),
    max_loop_depth=st.integers(0, 4),
    recursion_flag=st.booleans(),
    class_usage_flag=st.booleans(),
    state_machine_flag=st.booleans(),
    approx_cyclomatic=st.integers(0, 20),
    import_names=st.sets(st.sampled_from(["math", "json", "numpy"])).map(
        lambda s: tuple(sorted(s))
    ),
    return_arity_profile=st.dictionaries(
        st.integers(0, 3), st.integers(1, 4), max_size=3
    ).map(lambda d: tuple(sorted(d.items()))),
)

fingerprint_strategy = st.builds(
    make_fingerprint,
    family=st.sampled_from(["q-learning", "sarsa", "generic"]),
    trigrams=st.sets(
        st.tuples(
            st.sampled_from(["a", "b", "c"]),
            st.sampled_from(["x", "y"]),
            st.sampled_from(["p", "q"]),
        ),
        max_size=4,
    ).map(tuple),
    ast=ast_strategy,
    signature=st.builds(
        FailureSignature,
        failure_class=st.sampled_from(
            [FailureClass.UNKNOWN, FailureClass.IMPORT, FailureClass.RUNTIME]
        ),
        diagnostic_key=st.sampled_from(["", "typeerror", "modulenotfounderror"]),
    ),
)


@settings(max_examples=150, deadline=None)
@given(a=fingerprint_strategy, b=fingerprint_strategy)
def test_similarity_symmetric_and_bounded(a, b):
    forward = similarity(a, b)
    assert 0.0 <= forward <= 1.0
    assert forward == pytest.approx(similarity(b, a))


@settings(max_examples=60, deadline=None)
@given(fp=fingerprint_strategy)
def test_similarity_identity(fp):
    assert similarity(fp, fp) == pytest.approx(1.0)


def make_record(fp: Fingerprint, accepted=0, reward=0.0, report=None) -> EpisodeRecord:
    return EpisodeRecord(
        fingerprint=fp,
        task_text="demo request",
        candidate_source="def f():\n    return 1\n",
        report=report or (passing_report() if accepted else failing_report()),
        reward=reward,
        accepted=accepted,
        duration=0.1,
        decoding_action=None,
        retrieval_action=RetrievalAction.NONE,
    )


class TestStore:
    def test_persist_and_reload_round_trip(self, tmp_path):
        store = EpisodeStore(tmp_path / "episodes.jsonl")
        record = make_record(make_fingerprint(), accepted=1, reward=0.9)
        record_id = store.persist(record)
        reloaded = EpisodeStore(tmp_path / "episodes.jsonl")
        assert len(reloaded) == 1
        stored = reloaded.records[0]
        assert stored.record_id == record_id
        assert stored.to_dict() == {**record.to_dict(), "record_id": record_id}

    def test_eviction_drops_oldest_beyond_cap(self, tmp_path):
        store = EpisodeStore(tmp_path / "episodes.jsonl", retention_cap=100)
        for i in range(101):
            store.persist(make_record(make_fingerprint(), reward=i / 200))
        assert len(store) == 100
        ids = [r.record_id for r in store.records]
        assert min(ids) == 1  # record 0 evicted
        reloaded = EpisodeStore(tmp_path / "episodes.jsonl", retention_cap=100)
        assert [r.record_id for r in reloaded.records] == ids

    def test_concurrent_writer_lock_contention(self, tmp_path):
        path = tmp_path / "episodes.jsonl"
        store = EpisodeStore(path)
        lock_path = path.with_suffix(path.suffix + ".lock")
        with open(lock_path, "a") as holder:
            fcntl.flock(holder.fileno(), fcntl.LOCK_EX)
            with pytest.raises(StorageFailure):
                store.persist(make_record(make_fingerprint()))

    def test_accepted_record_requires_passing_report(self):
        with pytest.raises(ValueError):
            make_record(make_fingerprint(), accepted=1, report=failing_report())


class TestRetrieve:
    def test_empty_store_raises(self, tmp_path):
        store = EpisodeStore(tmp_path / "episodes.jsonl")
        with pytest.raises(EmptyStore):
            retrieve(store, make_fingerprint(), RetrievalMode.AST_MATCH, 1)

    def test_single_failure_match(self, tmp_path):
        store = EpisodeStore(tmp_path / "episodes.jsonl")
        fp = make_fingerprint(signature=FailureSignature(FailureClass.RUNTIME, "boom"))
        store.persist(make_record(fp))
        got = retrieve(store, fp, RetrievalMode.FAILURE_MATCH, 5)
        assert len(got) == 1

    def test_failure_match_filters_by_class(self, tmp_path):
        store = EpisodeStore(tmp_path / "episodes.jsonl")
        runtime_fp = make_fingerprint(
            signature=FailureSignature(FailureClass.RUNTIME, "boom")
        )
        import_fp = make_fingerprint(
            signature=FailureSignature(FailureClass.IMPORT, "missing")
        )
        store.persist(make_record(runtime_fp))
        store.persist(make_record(import_fp))
        got = retrieve(store, runtime_fp, RetrievalMode.FAILURE_MATCH, 5)
        assert len(got) == 1
        assert (
            got[0].fingerprint.failure_signature.failure_class is FailureClass.RUNTIME
        )

    def test_ranking_matches_hand_computed_similarities(self, tmp_path):
        store = EpisodeStore(tmp_path / "episodes.jsonl")
        query = make_fingerprint(
            family="q-learning",
            trigrams=(("a", "b", "c"), ("b", "c", "d")),
        )
        # 0.7: same trigrams+structure, different family; 1.0: identical;
        # lower: disjoint trigrams, same family.
        mid = make_fingerprint(family="sarsa", trigrams=query.trigrams)
        top = query
        low = make_fingerprint(family="q-learning", trigrams=(("x", "y", "z"),))
        for fp in (mid, top, low):
            store.persist(make_record(fp))
        got = retrieve(store, query, RetrievalMode.AST_MATCH, 2)
        assert [r.fingerprint for r in got] == [top, mid]

    def test_matches_brute_force_oracle(self, tmp_path):
        import random

        rng = random.Random(13)
        store = EpisodeStore(tmp_path / "episodes.jsonl")
        fps = []
        for _ in range(10):
            fp = make_fingerprint(
                family=rng.choice(["q-learning", "sarsa", "generic"]),
                trigrams=tuple(
                    {
                        (rng.choice("ab"), rng.choice("xy"), rng.choice("pq"))
                        for _ in range(rng.randint(0, 3))
                    }
                ),
                ast=AstFeatures(
                    function_count=rng.randint(0, 4),
                    approx_cyclomatic=rng.randint(0, 10),
                ),
            )
            fps.append(fp)
            store.persist(make_record(fp))
        query = fps[3]
        weights = SimilarityWeights(failure=0.0)
        oracle = sorted(
            store.records,
            key=lambda r: (
                -similarity(query, r.fingerprint, weights),
                -r.timestamp,
                -r.record_id,
            ),
        )[:4]
        got = retrieve(store, query, RetrievalMode.AST_MATCH, 4)
        assert [r.record_id for r in got] == [r.record_id for r in oracle]

    def test_retrieval_is_deterministic(self, tmp_path):
        store = EpisodeStore(tmp_path / "episodes.jsonl")
        for i in range(5):
            store.persist(make_record(make_fingerprint(trigrams=())))
        query = make_fingerprint(trigrams=())
        first = [r.record_id for r in retrieve(store, query, RetrievalMode.AST_MATCH, 3)]
        second = [r.record_id for r in retrieve(store, query, RetrievalMode.AST_MATCH, 3)]
        assert first == second
        # Equal similarity everywhere: recency (newest first) breaks the tie.
        assert first == [4, 3, 2]
