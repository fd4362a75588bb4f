"""Episodic memory: deterministic fingerprints, similarity, retrieval, storage.

Every attempt is persisted as a structured record; both successes and
failures are kept because failed attempts mark the boundary of what the
validator accepts. Fingerprints are embedding-free (task family, token
trigrams, structural features, failure signature, complexity bucket), so
retrieval is reproducible with no external index.
"""

from __future__ import annotations

import enum
import fcntl
import json
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from .analysis import MODE_FEATURES
from .bandit import RetrievalAction
from .task import TaskSpec
from .validation import FailureClass, ValidationReport, validator_pass

TRIGRAM_CAP = 256
RETENTION_CAP = 500

MEMORY_PATH_ENV_VAR = "MERA_MEMORY_PATH"

# Modules whose presence is flagged as a structural feature.
COMMON_LIBRARIES = ("collections", "itertools", "math", "numpy", "random")


class StorageFailure(Exception):
    """The episodic store could not be written (lock contention, IO error)."""


class EmptyStore(Exception):
    """Retrieval was asked against a store with no records."""


class ComplexityBucket(enum.Enum):
    LOW = "LOW"
    MED = "MED"
    HIGH = "HIGH"


def complexity_bucket(approx_cyclomatic: int) -> ComplexityBucket:
    if approx_cyclomatic <= 5:
        return ComplexityBucket.LOW
    if approx_cyclomatic <= 15:
        return ComplexityBucket.MED
    return ComplexityBucket.HIGH


@dataclass(frozen=True)
class AstFeatures:
    """Structural feature vector produced by the analyzer component."""

    function_count: int = 0
    class_count: int = 0
    max_loop_depth: int = 0
    recursion_flag: bool = False
    class_usage_flag: bool = False
    state_machine_flag: bool = False
    approx_cyclomatic: int = 0
    common_library_flags: tuple[tuple[str, bool], ...] = tuple(
        (name, False) for name in COMMON_LIBRARIES
    )
    import_names: tuple[str, ...] = ()
    return_arity_profile: tuple[tuple[int, int], ...] = ()

    @classmethod
    def from_payload(cls, payload: dict) -> "AstFeatures":
        flags = payload.get("common_library_flags", {})
        profile = payload.get("return_arity_profile", {})
        return cls(
            function_count=int(payload.get("function_count", 0)),
            class_count=int(payload.get("class_count", 0)),
            max_loop_depth=int(payload.get("max_loop_depth", 0)),
            recursion_flag=bool(payload.get("recursion_flag", False)),
            class_usage_flag=bool(payload.get("class_usage_flag", False)),
            state_machine_flag=bool(payload.get("state_machine_flag", False)),
            approx_cyclomatic=int(payload.get("approx_cyclomatic", 0)),
            common_library_flags=tuple(
                (name, bool(flags.get(name, False))) for name in COMMON_LIBRARIES
            ),
            import_names=tuple(sorted(payload.get("import_names", []))),
            return_arity_profile=tuple(
                sorted((int(k), int(v)) for k, v in profile.items())
            ),
        )

    def to_dict(self) -> dict:
        return {
            "function_count": self.function_count,
            "class_count": self.class_count,
            "max_loop_depth": self.max_loop_depth,
            "recursion_flag": self.recursion_flag,
            "class_usage_flag": self.class_usage_flag,
            "state_machine_flag": self.state_machine_flag,
            "approx_cyclomatic": self.approx_cyclomatic,
            "common_library_flags": {k: v for k, v in self.common_library_flags},
            "import_names": list(self.import_names),
            "return_arity_profile": {str(k): v for k, v in self.return_arity_profile},
        }

    def numeric_dimensions(self) -> tuple[float, ...]:
        """Scalar view used by the structural-similarity term."""
        return (
            float(self.function_count),
            float(self.class_count),
            float(self.max_loop_depth),
            float(self.approx_cyclomatic),
            float(self.recursion_flag),
            float(self.class_usage_flag),
            float(self.state_machine_flag),
            *(float(v) for _, v in self.common_library_flags),
        )


@dataclass(frozen=True)
class FailureSignature:
    failure_class: FailureClass = FailureClass.UNKNOWN
    diagnostic_key: str = ""


@dataclass(frozen=True)
class Fingerprint:
    task_family: str
    trigrams: tuple[tuple[str, str, str], ...]
    ast: AstFeatures
    failure_signature: FailureSignature
    bucket: ComplexityBucket

    def to_dict(self) -> dict:
        return {
            "task_family": self.task_family,
            "trigrams": [list(t) for t in self.trigrams],
            "ast": self.ast.to_dict(),
            "failure_class": self.failure_signature.failure_class.value,
            "diagnostic_key": self.failure_signature.diagnostic_key,
            "bucket": self.bucket.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Fingerprint":
        return cls(
            task_family=data["task_family"],
            trigrams=tuple(tuple(t) for t in data["trigrams"]),
            ast=AstFeatures.from_payload(data["ast"]),
            failure_signature=FailureSignature(
                FailureClass(data["failure_class"]), data["diagnostic_key"]
            ),
            bucket=ComplexityBucket(data["bucket"]),
        )


def token_trigrams(
    text: str, cap: int = TRIGRAM_CAP
) -> tuple[tuple[str, str, str], ...]:
    """Bounded set of consecutive lowercase word-token triples.

    Deduplicated, kept in first-occurrence order, truncated to ``cap``.
    Fewer than three tokens yields the empty set.
    """
    tokens = re.findall(r"[a-z0-9_]+", text.lower())
    seen: dict[tuple[str, str, str], None] = {}
    for i in range(len(tokens) - 2):
        gram = (tokens[i], tokens[i + 1], tokens[i + 2])
        if gram not in seen:
            seen[gram] = None
            if len(seen) >= cap:
                break
    return tuple(seen)


_WORD_PATTERN = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")


def diagnostic_key(report: ValidationReport) -> str:
    """Normalized key for the failed check: its first identifier-like token."""
    for check in report.checks:
        if check.outcome.value == "FAILED":
            match = _WORD_PATTERN.search(check.detail)
            return match.group(0).lower() if match else ""
    return ""


def failure_signature(report: ValidationReport | None) -> FailureSignature:
    if report is None:
        return FailureSignature()
    return FailureSignature(report.primary_failure, diagnostic_key(report))


def compute_fingerprint(
    task: TaskSpec,
    source: str | None,
    prev_report: ValidationReport | None,
    analyzer=None,
    trigram_cap: int = TRIGRAM_CAP,
) -> Fingerprint:
    """Deterministic fingerprint of (task, current code, previous failure).

    An absent source, or one the analyzer cannot parse, yields zeroed
    structural features; an absent previous report yields the no-failure
    signature.
    """
    ast_features = AstFeatures()
    if source is not None and analyzer is not None:
        response = analyzer.analyze(MODE_FEATURES, source)
        if response.ok:
            ast_features = AstFeatures.from_payload(response.payload)
    return Fingerprint(
        task_family=task.family,
        trigrams=token_trigrams(task.request, trigram_cap),
        ast=ast_features,
        failure_signature=failure_signature(prev_report),
        bucket=complexity_bucket(ast_features.approx_cyclomatic),
    )


@dataclass(frozen=True)
class SimilarityWeights:
    token: float = 0.4
    ast: float = 0.3
    failure: float = 0.2
    family: float = 0.1

    def __post_init__(self) -> None:
        if min(self.token, self.ast, self.failure, self.family) < 0:
            raise ValueError("similarity weights must be nonnegative")
        if self.token + self.ast + self.failure + self.family <= 0:
            raise ValueError("similarity weights must not all be zero")


def _jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 1.0
    union = len(a | b)
    return len(a & b) / union if union else 1.0


def _multiset_jaccard(a: tuple[tuple[int, int], ...], b: tuple[tuple[int, int], ...]) -> float:
    da, db = dict(a), dict(b)
    if not da and not db:
        return 1.0
    keys = set(da) | set(db)
    inter = sum(min(da.get(k, 0), db.get(k, 0)) for k in keys)
    union = sum(max(da.get(k, 0), db.get(k, 0)) for k in keys)
    return inter / union if union else 1.0


def _ratio_similarity(x: float, y: float) -> float:
    if x == 0.0 and y == 0.0:
        return 1.0
    return min(x, y) / max(x, y)


def structural_similarity(a: AstFeatures, b: AstFeatures) -> float:
    """Mean per-dimension ratio similarity over the scalar feature view."""
    dims_a = a.numeric_dimensions()
    dims_b = b.numeric_dimensions()
    return sum(_ratio_similarity(x, y) for x, y in zip(dims_a, dims_b)) / len(dims_a)


def ast_similarity(a: AstFeatures, b: AstFeatures) -> float:
    """Structural term blended with import and return-shape overlap."""
    s_struct = structural_similarity(a, b)
    s_imports = _jaccard(frozenset(a.import_names), frozenset(b.import_names))
    s_return = _multiset_jaccard(a.return_arity_profile, b.return_arity_profile)
    return 0.70 * s_struct + 0.15 * s_imports + 0.15 * s_return


def failure_similarity(a: FailureSignature, b: FailureSignature) -> float:
    if a.failure_class is not b.failure_class:
        return 0.0
    return 1.0 if a.diagnostic_key == b.diagnostic_key else 0.5


def similarity(a: Fingerprint, b: Fingerprint, w: SimilarityWeights | None = None) -> float:
    """Weighted mean of the token, structural, failure, and family terms."""
    w = w or SimilarityWeights()
    s_tok = _jaccard(frozenset(a.trigrams), frozenset(b.trigrams))
    s_ast = ast_similarity(a.ast, b.ast)
    s_fail = failure_similarity(a.failure_signature, b.failure_signature)
    s_fam = 1.0 if a.task_family == b.task_family else 0.0
    total = w.token + w.ast + w.failure + w.family
    return (w.token * s_tok + w.ast * s_ast + w.failure * s_fail + w.family * s_fam) / total


class RetrievalMode(enum.Enum):
    FAILURE_MATCH = "FAILURE_MATCH"
    AST_MATCH = "AST_MATCH"


@dataclass(frozen=True)
class EpisodeRecord:
    """One attempt: fingerprint, code, report, reward, acceptance, actions."""

    fingerprint: Fingerprint
    task_text: str
    candidate_source: str | None
    report: ValidationReport
    reward: float
    accepted: int
    duration: float
    decoding_action: str | None
    retrieval_action: RetrievalAction
    timestamp: float = field(default_factory=time.time)
    record_id: int = -1

    def __post_init__(self) -> None:
        if self.accepted not in (0, 1):
            raise ValueError("accepted must be 0 or 1")
        if self.accepted == 1 and not validator_pass(self.report):
            raise ValueError("an accepted record must carry a passing report")

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint.to_dict(),
            "task_text": self.task_text,
            "candidate_source": self.candidate_source,
            "report": self.report.to_dict(),
            "reward": self.reward,
            "accepted": self.accepted,
            "duration": self.duration,
            "decoding_action": self.decoding_action,
            "retrieval_action": self.retrieval_action.name,
            "timestamp": self.timestamp,
            "record_id": self.record_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EpisodeRecord":
        return cls(
            fingerprint=Fingerprint.from_dict(data["fingerprint"]),
            task_text=data["task_text"],
            candidate_source=data["candidate_source"],
            report=ValidationReport.from_dict(data["report"]),
            reward=float(data["reward"]),
            accepted=int(data["accepted"]),
            duration=float(data["duration"]),
            decoding_action=data["decoding_action"],
            retrieval_action=RetrievalAction[data["retrieval_action"]],
            timestamp=float(data["timestamp"]),
            record_id=int(data["record_id"]),
        )


class EpisodeStore:
    """Append-only JSONL store with a retention cap and advisory write lock.

    Single writer, any number of readers. Evicting past the retention cap
    triggers a compaction pass that rewrites the log without the evicted
    oldest records.
    """

    def __init__(self, path: str | Path, retention_cap: int = RETENTION_CAP) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.retention_cap = retention_cap
        self._records: list[EpisodeRecord] = []
        self._next_id = 0
        self._lock_handle = None
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self._records.append(EpisodeRecord.from_dict(json.loads(line)))
            if self._records:
                self._next_id = max(r.record_id for r in self._records) + 1

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> tuple[EpisodeRecord, ...]:
        return tuple(self._records)

    def _acquire_lock(self):
        lock_path = self.path.with_suffix(self.path.suffix + ".lock")
        handle = lock_path.open("a")
        try:
            fcntl.flock(handle.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError as exc:
            handle.close()
            raise StorageFailure(f"store {self.path} is locked by another writer") from exc
        return handle

    def persist(self, record: EpisodeRecord) -> int:
        """Durably append one record; returns its assigned id."""
        handle = self._acquire_lock()
        try:
            stored = replace(record, record_id=self._next_id)
            self._next_id += 1
            self._records.append(stored)
            if len(self._records) > self.retention_cap:
                self._records = self._records[-self.retention_cap :]
                self._compact()
            else:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(stored.to_dict(), sort_keys=True) + "\n")
                    fh.flush()
            return stored.record_id
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc
        finally:
            fcntl.flock(handle.fileno(), fcntl.LOCK_UN)
            handle.close()

    def _compact(self) -> None:
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            for record in self._records:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
        tmp.replace(self.path)


def retrieve(
    store: EpisodeStore,
    query: Fingerprint,
    mode: RetrievalMode,
    k: int,
    weights: SimilarityWeights | None = None,
) -> list[EpisodeRecord]:
    """Similarity-ranked records for a query fingerprint.

    FAILURE_MATCH restricts candidates to records sharing the query's failure
    class before ranking; AST_MATCH ranks every record with the failure term
    zeroed out. Ties break by recency, then record id.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(store) == 0:
        raise EmptyStore(f"no records in {store.path}")
    weights = weights or SimilarityWeights()
    if mode is RetrievalMode.FAILURE_MATCH:
        pool = [
            r
            for r in store.records
            if r.fingerprint.failure_signature.failure_class
            is query.failure_signature.failure_class
        ]
    else:
        pool = list(store.records)
        weights = replace(weights, failure=0.0)
    scored = sorted(
        pool,
        key=lambda r: (
            -similarity(query, r.fingerprint, weights),
            -r.timestamp,
            -r.record_id,
        ),
    )
    return scored[:k]
