"""Fingerprint code, compare similarities, and retrieve ranked episodes.

Fingerprints are embedding-free: task family, token trigrams, structural
features from the analyzer, failure signature, and a complexity bucket.
Retrieval ranks stored episodes by a weighted similarity and never needs an
external index.

Requires both packages installed.
"""

import tempfile
from pathlib import Path

from mera.analysis import SubprocessAnalyzer
from mera.bandit import RetrievalAction
from mera.memory import (
    EpisodeRecord,
    EpisodeStore,
    RetrievalMode,
    compute_fingerprint,
    retrieve,
    similarity,
)
from mera.task import TaskSpec
from mera.validation import CheckResult, Outcome, Stage, ValidationReport

LOOPY = """\
def sum_grid(grid):
    total = 0
    for row in grid:
        for cell in row:
            total += cell
    return total
"""

RECURSIVE = """\
def depth(node):
    if node is None:
        return 0
    return 1 + max(depth(node.left), depth(node.right))
"""


def failing_report() -> ValidationReport:
    checks = (
        CheckResult(Stage.SYNTAX, Outcome.PASSED),
        CheckResult(Stage.UNDEFINED_NAME, Outcome.PASSED),
        CheckResult(Stage.SPEC_CONTRACT, Outcome.PASSED),
        CheckResult(Stage.IMPORT, Outcome.PASSED),
        CheckResult(Stage.RUNTIME, Outcome.FAILED, "RuntimeError: boom"),
    )
    return ValidationReport.from_checks(checks)


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        analyzer = SubprocessAnalyzer(workdir=Path(tmp))
        q_task = TaskSpec(id="q", request="train a tabular q-learning agent on a grid")
        sarsa_task = TaskSpec(id="s", request="train a tabular sarsa agent on a grid")

        print("families from the keyword labeler:")
        print(f"  {q_task.request!r} -> {q_task.family}")
        print(f"  {sarsa_task.request!r} -> {sarsa_task.family}")

        fp_loopy = compute_fingerprint(q_task, LOOPY, failing_report(), analyzer)
        fp_recursive = compute_fingerprint(q_task, RECURSIVE, None, analyzer)
        fp_other_task = compute_fingerprint(sarsa_task, LOOPY, None, analyzer)

        print("\nstructural features seen by the fingerprint:")
        print(f"  loopy:     loops={fp_loopy.ast.max_loop_depth} "
              f"recursive={fp_loopy.ast.recursion_flag} bucket={fp_loopy.bucket.value}")
        print(f"  recursive: loops={fp_recursive.ast.max_loop_depth} "
              f"recursive={fp_recursive.ast.recursion_flag}")

        print("\npairwise similarities (default weights 0.4/0.3/0.2/0.1):")
        print(f"  loopy vs itself:        {similarity(fp_loopy, fp_loopy):.3f}")
        print(f"  loopy vs recursive:     {similarity(fp_loopy, fp_recursive):.3f}")
        print(f"  loopy vs other family:  {similarity(fp_loopy, fp_other_task):.3f}")

        store = EpisodeStore(Path(tmp) / "episodes.jsonl")
        for fp, source in ((fp_loopy, LOOPY), (fp_recursive, RECURSIVE), (fp_other_task, LOOPY)):
            store.persist(
                EpisodeRecord(
                    fingerprint=fp,
                    task_text="demo",
                    candidate_source=source,
                    report=failing_report(),
                    reward=-0.1,
                    accepted=0,
                    duration=0.2,
                    decoding_action=None,
                    retrieval_action=RetrievalAction.NONE,
                )
            )

        print("\nstructural retrieval for the loopy query (top 2):")
        for record in retrieve(store, fp_loopy, RetrievalMode.AST_MATCH, 2):
            print(
                f"  record {record.record_id}: "
                f"family={record.fingerprint.task_family} "
                f"similarity={similarity(fp_loopy, record.fingerprint):.3f}"
            )

        print("\nfailure-matched retrieval keeps only the same failure class:")
        matches = retrieve(store, fp_loopy, RetrievalMode.FAILURE_MATCH, 5)
        print(f"  {len(matches)} of {len(store)} records share the RUNTIME failure")


if __name__ == "__main__":
    main()
